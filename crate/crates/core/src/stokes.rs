//! Penalized Stokes solves on the staggered grid.
//!
//! Unknowns are the interior face velocities and one pressure per cell. The
//! momentum balance on face `f` reads, multiplied by the face volume `V_f`,
//!
//! `mu K u + (V_f / eta) chi_f (u - target) - B^T p = V_f force`,
//!
//! with `K` the finite-volume viscous operator and `B` the integrated cell
//! divergence. Incompressibility is imposed on every cell, solid ones
//! included: the rigid targets are discretely divergence free, and dropping
//! the constraint inside the particles lets mass leak through them.
//!
//! The saddle point is solved by augmented-Lagrangian Uzawa iteration in
//! residual form. The augmented operator `A + B^T W B` (W diagonal, `gamma`
//! over the cell area) is factored once per grid, mask and viscosity and reused for
//! every right-hand side.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Region;
use crate::grid::{
    cell_gradients, face_value, face_volume, is_boundary_u, is_boundary_v, viscous_stencil, Field,
    MaskSet, Neighbour, StaggeredGrid, Velocity, WallData,
};
use crate::linalg::{BandCholesky, SparseMatrix};

/// Penetration bound: `eta` is clamped to `ETA_RATIO * h_min^2 / mu`.
pub const ETA_RATIO: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Augmentation parameter in units of `mu`.
    pub gamma: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100_000,
            gamma: 1e3,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) || self.max_iter == 0 || !(self.gamma > 0.0) {
            return Err(Error::InvalidConfig(
                "solver needs tol > 0, max_iter > 0, gamma > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// Normwise backward error `|F - A u + B^T p| / (|F| + |A u| + |B^T p|)`.
    pub momentum_residual: f64,
    /// Largest pointwise divergence over fluid cells not touching a penalized face.
    pub divergence_residual: f64,
    /// Net flux of the prescribed box-boundary velocities, removed before solving.
    pub flux_defect: f64,
    pub wall_time: f64,
}

/// Right-hand side data of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    /// Body force per unit volume on every face.
    pub force: Velocity,
    /// Velocity imposed on non-fluid faces and on the box-boundary faces.
    pub target: Velocity,
    /// Tangential velocity on the box walls.
    pub walls: WallData,
}

impl ProblemData {
    pub fn zeros(grid: &StaggeredGrid) -> Self {
        Self {
            force: Velocity::zeros(grid),
            target: Velocity::zeros(grid),
            walls: WallData::zeros(grid),
        }
    }

    /// Targets and wall values from one function per region. Box-boundary
    /// faces use their own label, fluid ones take the exterior data.
    pub fn from_regions(
        grid: &StaggeredGrid,
        masks: &MaskSet,
        data: impl Fn(Region, [f64; 2]) -> [f64; 2],
    ) -> Self {
        let mut target = Velocity::zeros(grid);
        let outer = |r: Region| {
            if r == Region::Fluid {
                Region::OutsideD
            } else {
                r
            }
        };
        for j in 0..grid.ny() {
            for i in 0..=grid.nx() {
                let f = grid.u_index(i, j);
                if masks.u[f] != Region::Fluid || is_boundary_u(grid, i) {
                    target.u[f] = data(outer(masks.u[f]), grid.u_position(i, j))[0];
                }
            }
        }
        for j in 0..=grid.ny() {
            for i in 0..grid.nx() {
                let f = grid.v_index(i, j);
                if masks.v[f] != Region::Fluid || is_boundary_v(grid, j) {
                    target.v[f] = data(outer(masks.v[f]), grid.v_position(i, j))[1];
                }
            }
        }
        let walls = WallData::from_fn(grid, |x| data(Region::OutsideD, x));
        Self {
            force: Velocity::zeros(grid),
            target,
            walls,
        }
    }
}

/// A complete penalized problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedProblem {
    pub grid: StaggeredGrid,
    pub masks: MaskSet,
    pub mu: f64,
    pub eta: f64,
    pub data: ProblemData,
}

/// Solves one penalized problem from scratch.
pub fn solve_stokes(
    prob: &PenalizedProblem,
    tol: f64,
    max_iter: usize,
) -> Result<(Field, SolveStats)> {
    let opts = SolverOptions {
        tol,
        max_iter,
        ..SolverOptions::default()
    };
    let op = StokesOperator::new(&prob.grid, &prob.masks, prob.mu, prob.eta, opts)?;
    op.solve(&prob.data)
}

/// Factored augmented operator for a fixed grid, mask, viscosity and penalty.
#[derive(Debug, Clone)]
pub struct StokesOperator {
    grid: StaggeredGrid,
    masks: MaskSet,
    mu: f64,
    eta: f64,
    opts: SolverOptions,
    /// Face index of each unknown.
    faces: Vec<usize>,
    /// Unknown index of each face, `usize::MAX` for box-boundary faces.
    dof: Vec<usize>,
    /// `mu K + P` on the unknowns.
    a: SparseMatrix,
    /// Integrated divergence, cells by unknowns.
    b: SparseMatrix,
    /// Penalty coefficient `V_f / eta` per unknown, zero on fluid faces.
    penalty: Vec<f64>,
    /// Augmentation weight per cell, `gamma_c / area_c`.
    weight: Vec<f64>,
    chol: BandCholesky,
}

impl StokesOperator {
    pub fn new(
        grid: &StaggeredGrid,
        masks: &MaskSet,
        mu: f64,
        eta: f64,
        opts: SolverOptions,
    ) -> Result<Self> {
        opts.validate()?;
        if !(mu > 0.0 && mu.is_finite()) || !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidConfig("mu and eta must be positive".into()));
        }
        if masks.u.len() != grid.n_u()
            || masks.v.len() != grid.n_v()
            || masks.cells.len() != grid.n_cells()
        {
            return Err(Error::Domain("masks do not match the grid".into()));
        }
        if masks.fluid_cells() == 0 {
            return Err(Error::Domain("no fluid cells".into()));
        }
        let eta = eta.min(ETA_RATIO * grid.h_min().powi(2) / mu);
        let (faces, dof) = number_unknowns(grid);
        let n = faces.len();
        let nu = grid.n_u();
        let walls = WallData::zeros(grid);

        let mut penalty = vec![0.0; n];
        let mut trip = Vec::with_capacity(5 * n);
        for (k, &f) in faces.iter().enumerate() {
            let label = if f < nu { masks.u[f] } else { masks.v[f - nu] };
            let mut diag = 0.0;
            viscous_stencil(grid, &walls, f, |nb, c| {
                diag += mu * c;
                if let Neighbour::Face(g) = nb {
                    if dof[g] != usize::MAX {
                        trip.push((k, dof[g], -mu * c));
                    }
                }
            });
            if label != Region::Fluid {
                penalty[k] = face_volume(grid, f) / eta;
                diag += penalty[k];
            }
            trip.push((k, k, diag));
        }
        let a = SparseMatrix::from_triplets(n, n, trip.clone());

        let mut btrip = Vec::with_capacity(4 * grid.n_cells());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let c = grid.cell_index(i, j);
                for (f, s) in cell_faces(grid, i, j) {
                    if dof[f] != usize::MAX {
                        btrip.push((c, dof[f], s));
                    }
                }
            }
        }
        let b = SparseMatrix::from_triplets(grid.n_cells(), n, btrip);

        // Cells touching a penalized face get an augmentation as stiff as the
        // penalty; otherwise their pressure modes contract like 1 / (1 + gamma eta).
        let gamma = opts.gamma * mu;
        let mut weight = vec![0.0; grid.n_cells()];
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let stiff = cell_faces(grid, i, j)
                    .iter()
                    .filter(|(f, _)| dof[*f] != usize::MAX)
                    .map(|(f, _)| penalty[dof[*f]])
                    .fold(gamma, f64::max);
                let w = stiff / grid.cell_area(i, j);
                weight[grid.cell_index(i, j)] = w;
                let row: Vec<(usize, f64)> = cell_faces(grid, i, j)
                    .into_iter()
                    .filter(|(f, _)| dof[*f] != usize::MAX)
                    .map(|(f, s)| (dof[f], s))
                    .collect();
                for &(p, sp) in &row {
                    for &(q, sq) in &row {
                        trip.push((p, q, w * sp * sq));
                    }
                }
            }
        }
        let aug = SparseMatrix::from_triplets(n, n, trip);
        let chol = BandCholesky::factor(&aug, aug.bandwidth())?;
        Ok(Self {
            grid: grid.clone(),
            masks: masks.clone(),
            mu,
            eta,
            opts,
            faces,
            dof,
            a,
            b,
            penalty,
            weight,
            chol,
        })
    }

    pub fn grid(&self) -> &StaggeredGrid {
        &self.grid
    }
    pub fn masks(&self) -> &MaskSet {
        &self.masks
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    /// Penalty actually used, after clamping.
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn options(&self) -> SolverOptions {
        self.opts
    }
    pub fn unknowns(&self) -> usize {
        self.faces.len()
    }
    pub fn half_bandwidth(&self) -> usize {
        self.chol.half_bandwidth()
    }

    /// Momentum right-hand side and divergence data for one problem.
    fn right_hand_side(&self, data: &ProblemData) -> (Vec<f64>, Vec<f64>, f64) {
        let grid = &self.grid;
        let mu = self.mu;
        let rhs: Vec<f64> = self
            .faces
            .par_iter()
            .enumerate()
            .map(|(k, &f)| {
                let mut r = face_volume(grid, f) * face_value(grid, &data.force, f)
                    + self.penalty[k] * face_value(grid, &data.target, f);
                viscous_stencil(grid, &data.walls, f, |nb, c| match nb {
                    Neighbour::Face(g) if self.dof[g] == usize::MAX => {
                        r += mu * c * face_value(grid, &data.target, g)
                    }
                    Neighbour::Wall(v) => r += mu * c * v,
                    Neighbour::Face(_) => {}
                });
                r
            })
            .collect();
        let mut g = vec![0.0; grid.n_cells()];
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let c = grid.cell_index(i, j);
                for (f, s) in cell_faces(grid, i, j) {
                    if self.dof[f] == usize::MAX {
                        g[c] -= s * face_value(grid, &data.target, f);
                    }
                }
            }
        }
        let defect: f64 = g.iter().sum();
        let shift = defect / g.len() as f64;
        g.iter_mut().for_each(|v| *v -= shift);
        (rhs, g, -defect)
    }

    pub fn solve(&self, data: &ProblemData) -> Result<(Field, SolveStats)> {
        let start = Instant::now();
        let grid = &self.grid;
        data.force.check_shape(grid)?;
        data.target.check_shape(grid)?;
        let (rhs, g, flux_defect) = self.right_hand_side(data);
        let perimeter = 2.0 * (grid.hi()[0] - grid.lo()[0] + grid.hi()[1] - grid.lo()[1]);
        let scale = data.target.max_abs().max(1.0);
        if flux_defect.abs() > 1e-10 * perimeter * scale {
            return Err(Error::InvalidConfig(format!(
                "boundary data carry net flux {flux_defect:e} through the box"
            )));
        }
        let n = self.faces.len();
        let inv_area: Vec<f64> = (0..grid.n_cells())
            .map(|c| 1.0 / grid.cell_area(c % grid.nx(), c / grid.nx()))
            .collect();
        let fluid = interior_fluid_cells(grid, &self.masks);
        let rhs_norm = norm(&rhs);

        let mut u = vec![0.0; n];
        let mut p = vec![0.0; grid.n_cells()];
        let mut iterations = 0;
        let mut history = Vec::new();
        let (mut mom, mut div);
        loop {
            let au = self.a.mul_vec(&u);
            let btp = self.b.mul_transpose_vec(&p);
            let r: Vec<f64> = (0..n).map(|k| rhs[k] - au[k] + btp[k]).collect();
            let bu = self.b.mul_vec(&u);
            let e: Vec<f64> = bu.iter().zip(&g).map(|(x, y)| x - y).collect();
            let scale = rhs_norm + norm(&au) + norm(&btp);
            mom = if scale > 0.0 { norm(&r) / scale } else { 0.0 };
            div = e
                .iter()
                .zip(&inv_area)
                .zip(&fluid)
                .filter(|(_, fl)| **fl)
                .fold(0.0f64, |m, ((x, w), _)| m.max((x * w).abs()));
            if mom <= self.opts.tol && div <= self.opts.tol {
                break;
            }
            // The momentum residual has a roundoff floor set by the penalty rows;
            // once it stops improving near tol, further sweeps only add noise.
            history.push(mom);
            if div <= self.opts.tol
                && mom <= STAGNATION_CEILING * self.opts.tol
                && stagnated(&history)
            {
                break;
            }
            if iterations >= self.opts.max_iter {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: mom.max(div),
                });
            }
            let we: Vec<f64> = e.iter().zip(&self.weight).map(|(x, w)| x * w).collect();
            let bt_we = self.b.mul_transpose_vec(&we);
            let mut du: Vec<f64> = (0..n).map(|k| r[k] - bt_we[k]).collect();
            self.chol.solve_in_place(&mut du);
            u.iter_mut().zip(&du).for_each(|(x, d)| *x += d);
            let bu = self.b.mul_vec(&u);
            for c in 0..p.len() {
                p[c] -= self.weight[c] * (bu[c] - g[c]);
            }
            iterations += 1;
        }

        let mut velocity = data.target.clone();
        let nu = grid.n_u();
        for (k, &f) in self.faces.iter().enumerate() {
            if f < nu {
                velocity.u[f] = u[k];
            } else {
                velocity.v[f - nu] = u[k];
            }
        }
        normalize_pressure(grid, &self.masks, &mut p);
        let stats = SolveStats {
            iterations,
            momentum_residual: mom,
            divergence_residual: div,
            flux_defect,
            wall_time: start.elapsed().as_secs_f64(),
        };
        Ok((
            Field {
                velocity,
                pressure: p,
            },
            stats,
        ))
    }
}

/// Fluid cells whose four faces are fluid too; the divergence test ignores
/// cells touching a penalized face.
fn interior_fluid_cells(grid: &StaggeredGrid, masks: &MaskSet) -> Vec<bool> {
    let nu = grid.n_u();
    let mut out = vec![false; grid.n_cells()];
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            out[grid.cell_index(i, j)] = masks.is_fluid_cell(grid, i, j)
                && cell_faces(grid, i, j).iter().all(|&(f, _)| {
                    let r = if f < nu { masks.u[f] } else { masks.v[f - nu] };
                    r == Region::Fluid
                });
        }
    }
    out
}

/// Momentum residuals up to this multiple of tol may end on stagnation.
const STAGNATION_CEILING: f64 = 1e3;
const STAGNATION_WINDOW: usize = 8;

/// No halving of the residual over the last `STAGNATION_WINDOW` iterations.
fn stagnated(history: &[f64]) -> bool {
    let n = history.len();
    if n <= STAGNATION_WINDOW {
        return false;
    }
    let before = history[..n - STAGNATION_WINDOW]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let recent = history[n - STAGNATION_WINDOW..]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    recent > 0.5 * before
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Shifts `p` to zero area-weighted mean over fluid cells.
pub fn normalize_pressure(grid: &StaggeredGrid, masks: &MaskSet, p: &mut [f64]) {
    let (mut s, mut a) = (0.0, 0.0);
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            if masks.is_fluid_cell(grid, i, j) {
                let w = grid.cell_area(i, j);
                s += w * p[grid.cell_index(i, j)];
                a += w;
            }
        }
    }
    let mean = s / a;
    p.iter_mut().for_each(|v| *v -= mean);
}

/// Faces of cell `(i, j)` in the shared index space with their signed lengths
/// in the integrated divergence.
fn cell_faces(grid: &StaggeredGrid, i: usize, j: usize) -> [(usize, f64); 4] {
    let nu = grid.n_u();
    let (dx, dy) = (grid.dx()[i], grid.dy()[j]);
    [
        (grid.u_index(i + 1, j), dy),
        (grid.u_index(i, j), -dy),
        (nu + grid.v_index(i, j + 1), dx),
        (nu + grid.v_index(i, j), -dx),
    ]
}

/// Numbers the interior faces line by line along the longer axis, which keeps
/// the augmented operator's bandwidth near twice the shorter dimension.
fn number_unknowns(grid: &StaggeredGrid) -> (Vec<usize>, Vec<usize>) {
    let (nx, ny, nu) = (grid.nx(), grid.ny(), grid.n_u());
    let mut faces = Vec::with_capacity(grid.n_u() + grid.n_v());
    if ny >= nx {
        for j in 0..ny {
            if j > 0 {
                faces.extend((0..nx).map(|i| nu + grid.v_index(i, j)));
            }
            faces.extend((1..nx).map(|i| grid.u_index(i, j)));
        }
    } else {
        for i in 0..nx {
            if i > 0 {
                faces.extend((0..ny).map(|j| grid.u_index(i, j)));
            }
            faces.extend((1..ny).map(|j| nu + grid.v_index(i, j)));
        }
    }
    let mut dof = vec![usize::MAX; nu + grid.n_v()];
    for (k, &f) in faces.iter().enumerate() {
        dof[f] = k;
    }
    (faces, dof)
}

/// Strain components `[e11, e22, e12]` per cell. Normal strains difference the
/// cell faces; the shear strain averages its four corner values.
fn cell_strains(grid: &StaggeredGrid, w: &Velocity) -> Vec<[f64; 3]> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (xc, yc) = (grid.x_centres(), grid.y_centres());
    // corner (i, j) at (xn[i], yn[j]); one-sided shifts at the box edges
    let corner = |i: usize, j: usize| -> f64 {
        let jj = j.clamp(1, ny - 1);
        let ii = i.clamp(1, nx - 1);
        let uy = (w.u[grid.u_index(i, jj)] - w.u[grid.u_index(i, jj - 1)]) / (yc[jj] - yc[jj - 1]);
        let vx = (w.v[grid.v_index(ii, j)] - w.v[grid.v_index(ii - 1, j)]) / (xc[ii] - xc[ii - 1]);
        0.5 * (uy + vx)
    };
    let mut out = Vec::with_capacity(grid.n_cells());
    for j in 0..ny {
        for i in 0..nx {
            let e11 = (w.u[grid.u_index(i + 1, j)] - w.u[grid.u_index(i, j)]) / grid.dx()[i];
            let e22 = (w.v[grid.v_index(i, j + 1)] - w.v[grid.v_index(i, j)]) / grid.dy()[j];
            let e12 =
                0.25 * (corner(i, j) + corner(i + 1, j) + corner(i, j + 1) + corner(i + 1, j + 1));
            out.push([e11, e22, e12]);
        }
    }
    out
}

/// Midpoint quadrature over fluid cells of `2 mu e(a) : e(b)`.
pub fn strain_energy_product(
    grid: &StaggeredGrid,
    masks: &MaskSet,
    a: &Velocity,
    b: &Velocity,
    mu: f64,
) -> f64 {
    let ea = cell_strains(grid, a);
    let eb = cell_strains(grid, b);
    let mut s = 0.0;
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            if !masks.is_fluid_cell(grid, i, j) {
                continue;
            }
            let c = grid.cell_index(i, j);
            let (x, y) = (ea[c], eb[c]);
            s += grid.cell_area(i, j) * (x[0] * y[0] + x[1] * y[1] + 2.0 * x[2] * y[2]);
        }
    }
    2.0 * mu * s
}

/// Mean of `|u - target|` over the faces labelled `region`.
pub fn conformance(
    grid: &StaggeredGrid,
    masks: &MaskSet,
    w: &Velocity,
    region: Region,
    target: impl Fn([f64; 2]) -> [f64; 2],
) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for j in 0..grid.ny() {
        for i in 0..=grid.nx() {
            let f = grid.u_index(i, j);
            if masks.u[f] == region {
                s += (w.u[f] - target(grid.u_position(i, j))[0]).abs();
                n += 1;
            }
        }
    }
    for j in 0..=grid.ny() {
        for i in 0..grid.nx() {
            let f = grid.v_index(i, j);
            if masks.v[f] == region {
                s += (w.v[f] - target(grid.v_position(i, j))[1]).abs();
                n += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Pointwise divergence of `w`, largest over fluid cells.
pub fn max_fluid_divergence(grid: &StaggeredGrid, masks: &MaskSet, w: &Velocity) -> f64 {
    crate::grid::divergence(grid, w)
        .iter()
        .zip(&masks.cells)
        .filter(|(_, r)| **r == Region::Fluid)
        .fold(0.0, |m, (d, _)| m.max(d.abs()))
}

/// Largest `|du_i/dx_j|` of the difference of two velocities over the given cells.
pub fn max_gradient_difference(
    grid: &StaggeredGrid,
    cells: &[(usize, usize)],
    a: &Velocity,
    b: &Velocity,
) -> f64 {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    let g = cell_gradients(grid, &d);
    cells
        .iter()
        .map(|&(i, j)| {
            g[grid.cell_index(i, j)]
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
        })
        .fold(0.0, f64::max)
}
