use std::io::Write;

use super::field::{Field, Velocity};
use super::masks::MaskSet;
use super::mesh::StaggeredGrid;
use crate::error::{Error, Result};
use crate::geometry::{GapGeometry, Region};

/// Velocity gradient `[du/dx, du/dy, dv/dx, dv/dy]` at every cell centre.
///
/// Normal derivatives difference the two faces of the cell; cross derivatives
/// difference the cell-averaged velocity of the neighbouring cells, one-sided
/// at the box boundary.
pub fn cell_gradients(grid: &StaggeredGrid, w: &Velocity) -> Vec<[f64; 4]> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (dx, dy, xc, yc) = (grid.dx(), grid.dy(), grid.x_centres(), grid.y_centres());
    let ubar = |i: usize, j: usize| 0.5 * (w.u[grid.u_index(i, j)] + w.u[grid.u_index(i + 1, j)]);
    let vbar = |i: usize, j: usize| 0.5 * (w.v[grid.v_index(i, j)] + w.v[grid.v_index(i, j + 1)]);
    let mut out = Vec::with_capacity(grid.n_cells());
    for j in 0..ny {
        let (jm, jp) = (j.saturating_sub(1), (j + 1).min(ny - 1));
        for i in 0..nx {
            let (im, ip) = (i.saturating_sub(1), (i + 1).min(nx - 1));
            out.push([
                (w.u[grid.u_index(i + 1, j)] - w.u[grid.u_index(i, j)]) / dx[i],
                (ubar(i, jp) - ubar(i, jm)) / (yc[jp] - yc[jm]),
                (vbar(ip, j) - vbar(im, j)) / (xc[ip] - xc[im]),
                (w.v[grid.v_index(i, j + 1)] - w.v[grid.v_index(i, j)]) / dy[j],
            ]);
        }
    }
    out
}

fn max_entry(g: &[f64; 4]) -> f64 {
    g.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Fluid cells of the neck `Omega_r` whose `(2m+1) x (2m+1)` block of
/// surrounding cells is entirely fluid.
#[derive(Debug, Clone, PartialEq)]
pub struct GapSampler {
    cells: Vec<(usize, usize)>,
    centreline: Vec<(usize, usize)>,
}

impl GapSampler {
    pub fn new(
        geom: &GapGeometry,
        grid: &StaggeredGrid,
        masks: &MaskSet,
        r: f64,
        margin_cells: usize,
    ) -> Result<Self> {
        if !(r > 0.0 && r <= geom.neck_radius() * (1.0 + 1e-12)) {
            return Err(Error::Measurement(format!(
                "sampling radius {r} must lie in (0, R]"
            )));
        }
        let (nx, ny) = (grid.nx(), grid.ny());
        let m = margin_cells;
        let clear = |i: usize, j: usize| -> bool {
            if i < m || j < m || i + m >= nx || j + m >= ny {
                return false;
            }
            (j - m..=j + m).all(|jj| (i - m..=i + m).all(|ii| masks.is_fluid_cell(grid, ii, jj)))
        };
        let left = grid.column_of(-1e-14 * grid.h_min());
        let right = grid.column_of(1e-14 * grid.h_min());
        let mut cells = vec![];
        let mut centreline = vec![];
        for j in 0..ny {
            for i in 0..nx {
                let c = grid.cell_centre(i, j);
                if masks.cell(grid, i, j) != Region::Fluid
                    || !geom.neck_contains(&c, r)?
                    || !clear(i, j)
                {
                    continue;
                }
                cells.push((i, j));
                if i == left || i == right {
                    centreline.push((i, j));
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::Measurement("no admissible cells in the gap".into()));
        }
        if centreline.is_empty() {
            return Err(Error::Measurement(
                "no admissible cells on the centreline".into(),
            ));
        }
        Ok(Self { cells, centreline })
    }

    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    /// Largest `|du_i/dx_j|` over the sampled cells.
    pub fn max_gradient(&self, grid: &StaggeredGrid, w: &Velocity) -> f64 {
        let g = cell_gradients(grid, w);
        self.cells
            .iter()
            .map(|&(i, j)| max_entry(&g[grid.cell_index(i, j)]))
            .fold(0.0, f64::max)
    }

    /// Largest `|du_i/dx_j|` over the sampled cells adjacent to `x1 = 0`.
    pub fn centreline_gradient(&self, grid: &StaggeredGrid, w: &Velocity) -> f64 {
        let g = cell_gradients(grid, w);
        self.centreline
            .iter()
            .map(|&(i, j)| max_entry(&g[grid.cell_index(i, j)]))
            .fold(0.0, f64::max)
    }

    /// `max - min` of the pressure over the sampled cells.
    pub fn pressure_oscillation(&self, grid: &StaggeredGrid, p: &[f64]) -> f64 {
        let vals = self.cells.iter().map(|&(i, j)| p[grid.cell_index(i, j)]);
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
        hi - lo
    }

    /// Largest Frobenius norm of `2 mu e(u) - p I` over the sampled cells.
    pub fn max_stress(&self, grid: &StaggeredGrid, field: &Field, mu: f64) -> f64 {
        let g = cell_gradients(grid, &field.velocity);
        self.cells
            .iter()
            .map(|&(i, j)| {
                let c = grid.cell_index(i, j);
                let [ux, uy, vx, vy] = g[c];
                let p = field.pressure[c];
                let s11 = 2.0 * mu * ux - p;
                let s22 = 2.0 * mu * vy - p;
                let s12 = mu * (uy + vx);
                (s11 * s11 + s22 * s22 + 2.0 * s12 * s12).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

pub fn max_gradient_in_gap(
    geom: &GapGeometry,
    grid: &StaggeredGrid,
    masks: &MaskSet,
    w: &Velocity,
    r: f64,
    margin_cells: usize,
) -> Result<f64> {
    Ok(GapSampler::new(geom, grid, masks, r, margin_cells)?.max_gradient(grid, w))
}

pub fn centreline_gradient(
    geom: &GapGeometry,
    grid: &StaggeredGrid,
    masks: &MaskSet,
    w: &Velocity,
    margin_cells: usize,
) -> Result<f64> {
    Ok(
        GapSampler::new(geom, grid, masks, geom.neck_radius(), margin_cells)?
            .centreline_gradient(grid, w),
    )
}

pub fn pressure_oscillation(
    geom: &GapGeometry,
    grid: &StaggeredGrid,
    masks: &MaskSet,
    p: &[f64],
    r: f64,
    margin_cells: usize,
) -> Result<f64> {
    Ok(GapSampler::new(geom, grid, masks, r, margin_cells)?.pressure_oscillation(grid, p))
}

/// Largest `|du_i/dx_j|` over all fluid cells at least `margin_cells` from the
/// box boundary. Used on particle-free boxes.
pub fn max_gradient_fluid(
    grid: &StaggeredGrid,
    masks: &MaskSet,
    w: &Velocity,
    margin_cells: usize,
) -> f64 {
    let g = cell_gradients(grid, w);
    let (nx, ny, m) = (grid.nx(), grid.ny(), margin_cells);
    let mut best: f64 = 0.0;
    for j in m..ny.saturating_sub(m) {
        for i in m..nx.saturating_sub(m) {
            if masks.is_fluid_cell(grid, i, j) {
                best = best.max(max_entry(&g[grid.cell_index(i, j)]));
            }
        }
    }
    best
}

/// Writes `x,y,u,v,p` at cell centres, velocity averaged from the faces.
pub fn write_field_csv(grid: &StaggeredGrid, field: &Field, out: &mut impl Write) -> Result<()> {
    writeln!(out, "x,y,u,v,p")?;
    let w = &field.velocity;
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let [x, y] = grid.cell_centre(i, j);
            let u = 0.5 * (w.u[grid.u_index(i, j)] + w.u[grid.u_index(i + 1, j)]);
            let v = 0.5 * (w.v[grid.v_index(i, j)] + w.v[grid.v_index(i, j + 1)]);
            let p = field.pressure[grid.cell_index(i, j)];
            writeln!(out, "{x:.16e},{y:.16e},{u:.16e},{v:.16e},{p:.16e}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shear_and_rotation_gradients() {
        let grid = StaggeredGrid::uniform([-1.0, -1.0], [1.0, 1.0], 32).unwrap();
        let masks = MaskSet::all_fluid(&grid);
        let shear = Velocity::from_fn(&grid, |x| [x[1], 0.0]);
        assert!((max_gradient_fluid(&grid, &masks, &shear, 2) - 1.0).abs() < 1e-12);
        let rot = Velocity::from_fn(&grid, |x| [-x[1], x[0]]);
        assert!((max_gradient_fluid(&grid, &masks, &rot, 2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampler_on_gap() {
        let geom = GapGeometry::unit_disks(2, 0.2).unwrap();
        let grid = crate::grid::GridRule::default().build(&geom).unwrap();
        let masks = MaskSet::label(&geom, &grid).unwrap();
        let s = GapSampler::new(&geom, &grid, &masks, 0.5, 2).unwrap();
        assert!(s.cells().len() > 20);
        let shear = Velocity::from_fn(&grid, |x| [3.0 * x[1], 0.0]);
        assert!((s.max_gradient(&grid, &shear) - 3.0).abs() < 1e-9);
        assert!((s.centreline_gradient(&grid, &shear) - 3.0).abs() < 1e-9);
        let p: Vec<f64> = (0..grid.n_cells())
            .map(|c| grid.cell_centre(c % grid.nx(), c / grid.nx())[0])
            .collect();
        let osc = s.pressure_oscillation(&grid, &p);
        assert!(osc > 0.5 && osc < 1.0);
        assert!(GapSampler::new(&geom, &grid, &masks, 0.6, 2).is_err());
    }

    #[test]
    fn csv_export_shape() {
        let grid = StaggeredGrid::uniform([0.0, 0.0], [1.0, 1.0], 16).unwrap();
        let mut buf = Vec::new();
        write_field_csv(&grid, &Field::zeros(&grid), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 257);
        assert!(text.starts_with("x,y,u,v,p\n"));
    }
}
