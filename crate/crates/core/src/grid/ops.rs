//! Discrete operators on the staggered grid.
//!
//! Faces share one index space: vertical faces first (`grid.u_index`), then
//! horizontal faces offset by `grid.n_u()`.

use rayon::prelude::*;

use super::field::Velocity;
use super::masks::MaskSet;
use super::mesh::StaggeredGrid;
use crate::geometry::Region;

/// Tangential velocity prescribed on the four box walls, used as ghost values
/// by the viscous stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct WallData {
    /// Horizontal velocity on the bottom wall at `x = xn[i]`.
    pub u_bottom: Vec<f64>,
    pub u_top: Vec<f64>,
    /// Vertical velocity on the left wall at `y = yn[j]`.
    pub v_left: Vec<f64>,
    pub v_right: Vec<f64>,
}

impl WallData {
    pub fn zeros(grid: &StaggeredGrid) -> Self {
        Self {
            u_bottom: vec![0.0; grid.nx() + 1],
            u_top: vec![0.0; grid.nx() + 1],
            v_left: vec![0.0; grid.ny() + 1],
            v_right: vec![0.0; grid.ny() + 1],
        }
    }

    pub fn from_fn(grid: &StaggeredGrid, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let (lo, hi) = (grid.lo(), grid.hi());
        let xn = grid.x_nodes();
        let yn = grid.y_nodes();
        Self {
            u_bottom: xn.iter().map(|&x| f([x, lo[1]])[0]).collect(),
            u_top: xn.iter().map(|&x| f([x, hi[1]])[0]).collect(),
            v_left: yn.iter().map(|&y| f([lo[0], y])[1]).collect(),
            v_right: yn.iter().map(|&y| f([hi[0], y])[1]).collect(),
        }
    }
}

/// A neighbour in the viscous stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Neighbour {
    Face(usize),
    Wall(f64),
}

pub(crate) fn is_boundary_u(grid: &StaggeredGrid, i: usize) -> bool {
    i == 0 || i == grid.nx()
}

pub(crate) fn is_boundary_v(grid: &StaggeredGrid, j: usize) -> bool {
    j == 0 || j == grid.ny()
}

/// Visits the neighbours of interior face `f` with their conductances, so that
/// `V_f (-Lap w)_f = sum c (w_f - w_n)`.
pub(crate) fn viscous_stencil(
    grid: &StaggeredGrid,
    walls: &WallData,
    f: usize,
    mut visit: impl FnMut(Neighbour, f64),
) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (xn, yn, xc, yc, dx, dy) = (
        grid.x_nodes(),
        grid.y_nodes(),
        grid.x_centres(),
        grid.y_centres(),
        grid.dx(),
        grid.dy(),
    );
    let nu = grid.n_u();
    if f < nu {
        let (i, j) = (f % (nx + 1), f / (nx + 1));
        debug_assert!(!is_boundary_u(grid, i));
        let w = grid.dx_face(i);
        visit(Neighbour::Face(grid.u_index(i + 1, j)), dy[j] / dx[i]);
        visit(Neighbour::Face(grid.u_index(i - 1, j)), dy[j] / dx[i - 1]);
        if j + 1 < ny {
            visit(
                Neighbour::Face(grid.u_index(i, j + 1)),
                w / (yc[j + 1] - yc[j]),
            );
        } else {
            visit(Neighbour::Wall(walls.u_top[i]), w / (yn[ny] - yc[j]));
        }
        if j > 0 {
            visit(
                Neighbour::Face(grid.u_index(i, j - 1)),
                w / (yc[j] - yc[j - 1]),
            );
        } else {
            visit(Neighbour::Wall(walls.u_bottom[i]), w / (yc[0] - yn[0]));
        }
    } else {
        let g = f - nu;
        let (i, j) = (g % nx, g / nx);
        debug_assert!(!is_boundary_v(grid, j));
        let h = grid.dy_face(j);
        visit(Neighbour::Face(nu + grid.v_index(i, j + 1)), dx[i] / dy[j]);
        visit(
            Neighbour::Face(nu + grid.v_index(i, j - 1)),
            dx[i] / dy[j - 1],
        );
        if i + 1 < nx {
            visit(
                Neighbour::Face(nu + grid.v_index(i + 1, j)),
                h / (xc[i + 1] - xc[i]),
            );
        } else {
            visit(Neighbour::Wall(walls.v_right[j]), h / (xn[nx] - xc[i]));
        }
        if i > 0 {
            visit(
                Neighbour::Face(nu + grid.v_index(i - 1, j)),
                h / (xc[i] - xc[i - 1]),
            );
        } else {
            visit(Neighbour::Wall(walls.v_left[j]), h / (xc[0] - xn[0]));
        }
    }
}

/// Face value in the shared index space.
#[inline]
pub(crate) fn face_value(grid: &StaggeredGrid, w: &Velocity, f: usize) -> f64 {
    let nu = grid.n_u();
    if f < nu {
        w.u[f]
    } else {
        w.v[f - nu]
    }
}

/// Control volume of a face in the shared index space.
pub(crate) fn face_volume(grid: &StaggeredGrid, f: usize) -> f64 {
    let (nx, nu) = (grid.nx(), grid.n_u());
    if f < nu {
        grid.u_volume(f % (nx + 1), f / (nx + 1))
    } else {
        let g = f - nu;
        grid.v_volume(g % nx, g / nx)
    }
}

/// Pointwise divergence at cell centres.
pub fn divergence(grid: &StaggeredGrid, w: &Velocity) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (dx, dy) = (grid.dx(), grid.dy());
    let mut out = vec![0.0; grid.n_cells()];
    out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        for (i, d) in row.iter_mut().enumerate() {
            *d = (w.u[grid.u_index(i + 1, j)] - w.u[grid.u_index(i, j)]) / dx[i]
                + (w.v[grid.v_index(i, j + 1)] - w.v[grid.v_index(i, j)]) / dy[j];
        }
    });
    debug_assert_eq!(out.len(), nx * ny);
    out
}

/// Pressure gradient on interior faces; box-boundary faces get zero.
pub fn gradient(grid: &StaggeredGrid, p: &[f64]) -> Velocity {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = Velocity::zeros(grid);
    for j in 0..ny {
        for i in 1..nx {
            out.u[grid.u_index(i, j)] =
                (p[grid.cell_index(i, j)] - p[grid.cell_index(i - 1, j)]) / grid.dx_face(i);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            out.v[grid.v_index(i, j)] =
                (p[grid.cell_index(i, j)] - p[grid.cell_index(i, j - 1)]) / grid.dy_face(j);
        }
    }
    out
}

/// Vector Laplacian on interior faces with ghost wall values; box-boundary
/// faces get zero.
pub fn laplacian(grid: &StaggeredGrid, w: &Velocity, walls: &WallData) -> Velocity {
    let mut out = Velocity::zeros(grid);
    let nu = grid.n_u();
    let apply = |f: usize| -> f64 {
        let wf = face_value(grid, w, f);
        let mut acc = 0.0;
        viscous_stencil(grid, walls, f, |n, c| {
            let wn = match n {
                Neighbour::Face(g) => face_value(grid, w, g),
                Neighbour::Wall(v) => v,
            };
            acc += c * (wn - wf);
        });
        acc / face_volume(grid, f)
    };
    out.u.par_iter_mut().enumerate().for_each(|(f, o)| {
        if !is_boundary_u(grid, f % (grid.nx() + 1)) {
            *o = apply(f);
        }
    });
    out.v.par_iter_mut().enumerate().for_each(|(g, o)| {
        if !is_boundary_v(grid, g / grid.nx()) {
            *o = apply(nu + g);
        }
    });
    out
}

/// Skew-symmetric transport of `w` by `a`: for each interior fluid face,
/// half the sum over its control-volume faces of outward flux of `a` times
/// the neighbouring value of `w`, divided by the volume. Neighbours outside
/// the box count as zero. `sum V_f w_f advect(a, w)_f` vanishes for every `a`
/// when `w` is zero on non-fluid and box-boundary faces.
pub fn advect(grid: &StaggeredGrid, masks: &MaskSet, a: &Velocity, w: &Velocity) -> Velocity {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (dx, dy) = (grid.dx(), grid.dy());
    let mut out = Velocity::zeros(grid);
    out.u
        .par_chunks_mut(nx + 1)
        .enumerate()
        .for_each(|(j, row)| {
            for i in 1..nx {
                let f = grid.u_index(i, j);
                if masks.u[f] != Region::Fluid {
                    continue;
                }
                let fe = 0.5 * dy[j] * (a.u[f] + a.u[grid.u_index(i + 1, j)]);
                let fw = -0.5 * dy[j] * (a.u[grid.u_index(i - 1, j)] + a.u[f]);
                let fnorth = 0.5
                    * (dx[i - 1] * a.v[grid.v_index(i - 1, j + 1)]
                        + dx[i] * a.v[grid.v_index(i, j + 1)]);
                let fsouth = -0.5
                    * (dx[i - 1] * a.v[grid.v_index(i - 1, j)] + dx[i] * a.v[grid.v_index(i, j)]);
                let mut acc = fe * w.u[grid.u_index(i + 1, j)] + fw * w.u[grid.u_index(i - 1, j)];
                if j + 1 < ny {
                    acc += fnorth * w.u[grid.u_index(i, j + 1)];
                }
                if j > 0 {
                    acc += fsouth * w.u[grid.u_index(i, j - 1)];
                }
                row[i] = 0.5 * acc / grid.u_volume(i, j);
            }
        });
    out.v.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        if j == 0 || j == ny {
            return;
        }
        for (i, o) in row.iter_mut().enumerate() {
            let f = grid.v_index(i, j);
            if masks.v[f] != Region::Fluid {
                continue;
            }
            let fnorth = 0.5 * dx[i] * (a.v[f] + a.v[grid.v_index(i, j + 1)]);
            let fsouth = -0.5 * dx[i] * (a.v[grid.v_index(i, j - 1)] + a.v[f]);
            let fe = 0.5
                * (dy[j - 1] * a.u[grid.u_index(i + 1, j - 1)]
                    + dy[j] * a.u[grid.u_index(i + 1, j)]);
            let fw =
                -0.5 * (dy[j - 1] * a.u[grid.u_index(i, j - 1)] + dy[j] * a.u[grid.u_index(i, j)]);
            let mut acc =
                fnorth * w.v[grid.v_index(i, j + 1)] + fsouth * w.v[grid.v_index(i, j - 1)];
            if i + 1 < nx {
                acc += fe * w.v[grid.v_index(i + 1, j)];
            }
            if i > 0 {
                acc += fw * w.v[grid.v_index(i - 1, j)];
            }
            *o = 0.5 * acc / grid.v_volume(i, j);
        }
    });
    out
}

/// `sum_c area_c a_c b_c`.
pub fn cell_inner(grid: &StaggeredGrid, a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let c = grid.cell_index(i, j);
            s += grid.cell_area(i, j) * a[c] * b[c];
        }
    }
    s
}

/// `sum_f V_f a_f b_f` over all faces.
pub fn face_inner(grid: &StaggeredGrid, a: &Velocity, b: &Velocity) -> f64 {
    let mut s = 0.0;
    for j in 0..grid.ny() {
        for i in 0..=grid.nx() {
            let f = grid.u_index(i, j);
            s += grid.u_volume(i, j) * a.u[f] * b.u[f];
        }
    }
    for j in 0..=grid.ny() {
        for i in 0..grid.nx() {
            let f = grid.v_index(i, j);
            s += grid.v_volume(i, j) * a.v[f] * b.v[f];
        }
    }
    s
}

/// Bilinear interpolation of the velocity at `x` (clamped to the box).
pub fn interpolate_velocity(grid: &StaggeredGrid, w: &Velocity, x: [f64; 2]) -> [f64; 2] {
    let u = interp2(
        grid.x_nodes(),
        grid.y_centres(),
        |i, j| w.u[grid.u_index(i, j)],
        x,
    );
    let v = interp2(
        grid.x_centres(),
        grid.y_nodes(),
        |i, j| w.v[grid.v_index(i, j)],
        x,
    );
    [u, v]
}

/// Bilinear interpolation of a cell-centred array.
pub fn interpolate_cells(grid: &StaggeredGrid, p: &[f64], x: [f64; 2]) -> f64 {
    interp2(
        grid.x_centres(),
        grid.y_centres(),
        |i, j| p[grid.cell_index(i, j)],
        x,
    )
}

fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
    let n = axis.len();
    if x <= axis[0] {
        return (0, 0.0);
    }
    if x >= axis[n - 1] {
        return (n - 2, 1.0);
    }
    let k = axis.partition_point(|a| *a <= x) - 1;
    let k = k.min(n - 2);
    (k, (x - axis[k]) / (axis[k + 1] - axis[k]))
}

fn interp2(xs: &[f64], ys: &[f64], val: impl Fn(usize, usize) -> f64, x: [f64; 2]) -> f64 {
    let (i, s) = bracket(xs, x[0]);
    let (j, t) = bracket(ys, x[1]);
    (1.0 - s) * (1.0 - t) * val(i, j)
        + s * (1.0 - t) * val(i + 1, j)
        + (1.0 - s) * t * val(i, j + 1)
        + s * t * val(i + 1, j + 1)
}
