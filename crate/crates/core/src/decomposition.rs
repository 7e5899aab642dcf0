//! Splitting the flow into cell problems and a rigid-balance system.
//!
//! The velocity is `u = sum_{i,a} C_i^a u_i^a + u_0 (+ u_p)`, where `u_i^a`
//! carries the rigid mode `psi_a` on particle `i` and vanishes elsewhere,
//! `u_0` carries the exterior data and `u_p` absorbs the convective forcing
//! of a Navier-Stokes iterate. The coefficients follow from zero net force and
//! torque on each particle, written in energy form:
//!
//! `sum_k C_k a_kl = -E(u_0, u_l) - E(u_p, u_l) - T(u, u, u_l)`,
//!
//! with `E` the strain-energy product and `T` the trilinear form.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GapGeometry, Region};
use crate::grid::{advect, build_masks, Field, MaskSet, StaggeredGrid, Velocity};
use crate::keller::RigidMode;
use crate::stokes::{
    conformance, strain_energy_product, ProblemData, SolveStats, SolverOptions, StokesOperator,
};

/// Number of cell problems in two dimensions: two particles times three modes.
pub const CELL_COUNT: usize = 6;

/// Largest condition number accepted by [`solve_coefficients`].
pub const MAX_CONDITION: f64 = 1e14;

/// Exterior boundary data, a quadratic polynomial field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[derive(Default)]
pub enum BoundaryData {
    /// `(0, x2)`. Not divergence free, so it carries net flux through any
    /// closed curve and cannot be imposed on an incompressible flow.
    ShearY,
    /// Simple shear `(x2, 0)`.
    ShearX,
    /// A divergence-free quadratic field without mirror symmetry, so every
    /// rigid mode is excited.
    #[default]
    Mixed,
    /// Coefficients of `1, x1, x2, x1^2, x1 x2, x2^2` for each component.
    Custom { u: [f64; 6], v: [f64; 6] },
}

impl BoundaryData {
    pub fn coefficients(&self) -> ([f64; 6], [f64; 6]) {
        match *self {
            BoundaryData::ShearY => ([0.0; 6], [0.0, 0.0, 1.0, 0.0, 0.0, 0.0]),
            BoundaryData::ShearX => ([0.0, 0.0, 1.0, 0.0, 0.0, 0.0], [0.0; 6]),
            BoundaryData::Mixed => (
                [0.0, 0.5, 1.0, 0.3, 0.0, -0.3],
                [0.0, 0.4, -0.5, 0.0, -0.6, 0.0],
            ),
            BoundaryData::Custom { u, v } => (u, v),
        }
    }

    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        let (u, v) = self.coefficients();
        let m = [1.0, x[0], x[1], x[0] * x[0], x[0] * x[1], x[1] * x[1]];
        let dot = |c: [f64; 6]| c.iter().zip(&m).map(|(a, b)| a * b).sum::<f64>();
        [dot(u), dot(v)]
    }

    /// Divergence as `(constant, x1, x2)` coefficients.
    pub fn divergence(&self) -> [f64; 3] {
        let (u, v) = self.coefficients();
        [u[1] + v[2], 2.0 * u[3] + v[4], u[4] + 2.0 * v[5]]
    }

    /// Rejects data with nonzero net flux. For a quadratic field the flux
    /// through any closed curve equals the integral of its (affine)
    /// divergence over the enclosed region.
    pub fn check_compatible(&self) -> Result<()> {
        let d = self.divergence();
        if d.iter().any(|c| c.abs() > 1e-14) {
            return Err(Error::InvalidConfig(format!(
                "boundary data {self:?} are not divergence free (div = {} + {} x1 + {} x2) and carry net flux",
                d[0], d[1], d[2]
            )));
        }
        Ok(())
    }
}

/// Which problem a cell solution belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellLabel {
    Mode { particle: u8, alpha: usize },
    Background,
    Particular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    pub label: CellLabel,
    pub field: Field,
    pub stats: SolveStats,
}

/// Physical and numerical parameters shared by every solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsParams {
    pub mu: f64,
    pub eta: f64,
    pub solver: SolverOptions,
    /// Multiplies the exterior data.
    pub phi_scale: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            eta: 1e-8,
            solver: SolverOptions::default(),
            phi_scale: 1.0,
        }
    }
}

/// Flat index of cell problem `(particle, alpha)`, both 1-based.
pub fn cell_index(particle: u8, alpha: usize) -> usize {
    (particle as usize - 1) * 3 + (alpha - 1)
}

/// The six mode problems, the background problem and their shared operator.
#[derive(Debug, Clone)]
pub struct CellSet {
    pub geom: GapGeometry,
    pub phi: BoundaryData,
    pub params: PhysicsParams,
    pub operator: StokesOperator,
    /// Mode solutions in the order of [`cell_index`], then the background.
    pub solutions: Vec<CellSolution>,
}

impl CellSet {
    pub fn grid(&self) -> &StaggeredGrid {
        self.operator.grid()
    }
    pub fn masks(&self) -> &MaskSet {
        self.operator.masks()
    }
    pub fn mode(&self, particle: u8, alpha: usize) -> &CellSolution {
        &self.solutions[cell_index(particle, alpha)]
    }
    pub fn background(&self) -> &CellSolution {
        &self.solutions[CELL_COUNT]
    }

    fn mode_velocities(&self) -> Vec<&Velocity> {
        self.solutions[..CELL_COUNT]
            .iter()
            .map(|s| &s.field.velocity)
            .collect()
    }

    /// Solves the zero-data problem driven by body force `force`.
    pub fn particular(&self, force: &Velocity) -> Result<CellSolution> {
        let mut data = ProblemData::zeros(self.grid());
        data.force = force.clone();
        let (field, stats) = self.operator.solve(&data)?;
        Ok(CellSolution {
            label: CellLabel::Particular,
            field,
            stats,
        })
    }

    /// `sum_k c_k u_k + u_0 (+ particular)`.
    pub fn reconstruct(&self, c: &[f64], particular: Option<&Field>) -> Field {
        let mut out = self.background().field.clone();
        for (k, ck) in c.iter().enumerate() {
            out.axpy(*ck, &self.solutions[k].field);
        }
        if let Some(p) = particular {
            out.axpy(1.0, p);
        }
        out
    }

    /// Mean boundary mismatch of every mode problem on its own particle and
    /// on the other particle.
    pub fn conformance(&self) -> Vec<(f64, f64)> {
        let (grid, masks) = (self.grid(), self.masks());
        (0..CELL_COUNT)
            .map(|k| {
                let (particle, alpha) = ((k / 3 + 1) as u8, k % 3 + 1);
                let mode = RigidMode::new(2, alpha).expect("2d mode");
                let (own, other) = if particle == 1 {
                    (Region::InsideD1, Region::InsideD2)
                } else {
                    (Region::InsideD2, Region::InsideD1)
                };
                let w = &self.solutions[k].field.velocity;
                let psi = |x: [f64; 2]| {
                    let v = mode.eval(&x);
                    [v[0], v[1]]
                };
                (
                    conformance(grid, masks, w, own, psi),
                    conformance(grid, masks, w, other, |_| [0.0, 0.0]),
                )
            })
            .collect()
    }
}

/// Builds masks and the factored operator, then solves the seven linear
/// problems (in parallel, results in fixed order).
pub fn solve_cell_problems(
    geom: &GapGeometry,
    grid: &StaggeredGrid,
    phi: BoundaryData,
    params: PhysicsParams,
) -> Result<CellSet> {
    if geom.dim() != 2 {
        return Err(Error::Unsupported(
            "cell problems are solved in two dimensions only".into(),
        ));
    }
    phi.check_compatible()?;
    let masks = build_masks(geom, grid)?;
    let operator = StokesOperator::new(grid, &masks, params.mu, params.eta, params.solver)?;
    let mut labels: Vec<CellLabel> = (0..CELL_COUNT)
        .map(|k| CellLabel::Mode {
            particle: (k / 3 + 1) as u8,
            alpha: k % 3 + 1,
        })
        .collect();
    labels.push(CellLabel::Background);
    let scale = params.phi_scale;
    let solutions = labels
        .par_iter()
        .map(|&label| {
            let data = ProblemData::from_regions(grid, &masks, |region, x| match (label, region) {
                (CellLabel::Mode { particle: 1, alpha }, Region::InsideD1)
                | (CellLabel::Mode { particle: 2, alpha }, Region::InsideD2) => {
                    let v = RigidMode::new(2, alpha).expect("2d mode").eval(&x);
                    [v[0], v[1]]
                }
                (CellLabel::Background, Region::OutsideD) => {
                    let v = phi.eval(x);
                    [scale * v[0], scale * v[1]]
                }
                _ => [0.0, 0.0],
            });
            operator.solve(&data).map(|(field, stats)| CellSolution {
                label,
                field,
                stats,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CellSet {
        geom: *geom,
        phi,
        params,
        operator,
        solutions,
    })
}

/// Discrete `int u . grad v . w` over fluid faces, using [`advect`].
pub fn trilinear(
    grid: &StaggeredGrid,
    masks: &MaskSet,
    u: &Velocity,
    v: &Velocity,
    w: &Velocity,
) -> f64 {
    let a = advect(grid, masks, u, v);
    let mut s = 0.0;
    for j in 0..grid.ny() {
        for i in 0..=grid.nx() {
            let f = grid.u_index(i, j);
            if masks.u[f] == Region::Fluid {
                s += grid.u_volume(i, j) * a.u[f] * w.u[f];
            }
        }
    }
    for j in 0..=grid.ny() {
        for i in 0..grid.nx() {
            let f = grid.v_index(i, j);
            if masks.v[f] == Region::Fluid {
                s += grid.v_volume(i, j) * a.v[f] * w.v[f];
            }
        }
    }
    s
}

/// The 6x6 rigid-balance system and its solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidSystem {
    /// Row `l`, column `k`: `E(u_k, u_l)`.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// Ratio of extreme singular values of `a`.
    pub conditioning: f64,
}

impl RigidSystem {
    /// `|C_1^a - C_2^a|` for `a = 1, 2, 3`.
    pub fn coefficient_gaps(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| (self.c[a] - self.c[3 + a]).abs())
    }

    /// Diagonal of the particle-one block.
    pub fn a11_diagonal(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.a[a][a])
    }

    /// Largest `|a_kl - a_lk| / max |a|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst: f64 = 0.0;
        for k in 0..self.a.len() {
            for l in 0..self.a.len() {
                worst = worst.max((self.a[k][l] - self.a[l][k]).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// True when the particle-one 3x3 block admits a Cholesky factorization.
    pub fn a11_positive_definite(&self) -> bool {
        let m = DMatrix::from_fn(3, 3, |r, c| 0.5 * (self.a[r][c] + self.a[c][r]));
        m.cholesky().is_some()
    }

    /// `a C - b`, the discrete net force and torque left over.
    pub fn equilibrium_residual(&self) -> Vec<f64> {
        (0..self.b.len())
            .map(|l| {
                (0..self.c.len())
                    .map(|k| self.a[l][k] * self.c[k])
                    .sum::<f64>()
                    - self.b[l]
            })
            .collect()
    }
}

/// Assembles the balance matrix and right side from the cell solutions, the
/// convective forcing `g` (approximating `u . grad u`) and the particular
/// solution it drives.
pub fn assemble_rigid_system(
    cells: &CellSet,
    g: Option<&Velocity>,
    particular: Option<&Field>,
) -> Result<RigidSystem> {
    let (grid, masks, mu) = (cells.grid(), cells.masks(), cells.params.mu);
    let modes = cells.mode_velocities();
    let n = modes.len();
    let mut a = vec![vec![0.0; n]; n];
    for l in 0..n {
        for k in l..n {
            let e = strain_energy_product(grid, masks, modes[k], modes[l], mu);
            a[l][k] = e;
            a[k][l] = e;
        }
    }
    let u0 = &cells.background().field.velocity;
    let b = (0..n)
        .map(|l| {
            let mut r = -strain_energy_product(grid, masks, u0, modes[l], mu);
            if let Some(p) = particular {
                r -= strain_energy_product(grid, masks, &p.velocity, modes[l], mu);
            }
            if let Some(g) = g {
                r -= face_product(grid, masks, g, modes[l]);
            }
            r
        })
        .collect::<Vec<_>>();
    if a.iter().flatten().chain(&b).any(|v| !v.is_finite()) {
        return Err(Error::Assembly(
            "non-finite entries in the rigid system".into(),
        ));
    }
    let conditioning = condition_number(&a);
    Ok(RigidSystem {
        a,
        b,
        c: vec![0.0; n],
        conditioning,
    })
}

/// `sum V_f g_f w_f` over fluid faces.
fn face_product(grid: &StaggeredGrid, masks: &MaskSet, g: &Velocity, w: &Velocity) -> f64 {
    let mut s = 0.0;
    for j in 0..grid.ny() {
        for i in 0..=grid.nx() {
            let f = grid.u_index(i, j);
            if masks.u[f] == Region::Fluid {
                s += grid.u_volume(i, j) * g.u[f] * w.u[f];
            }
        }
    }
    for j in 0..=grid.ny() {
        for i in 0..grid.nx() {
            let f = grid.v_index(i, j);
            if masks.v[f] == Region::Fluid {
                s += grid.v_volume(i, j) * g.v[f] * w.v[f];
            }
        }
    }
    s
}

fn condition_number(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let m = DMatrix::from_fn(n, n, |r, c| a[r][c]);
    let sv = m.singular_values();
    let (hi, lo) = sv
        .iter()
        .fold((0.0f64, f64::INFINITY), |(h, l), s| (h.max(*s), l.min(*s)));
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Solves `a C = b` by LU with partial pivoting and stores `C` in the system.
pub fn solve_coefficients(sys: &mut RigidSystem) -> Result<Vec<f64>> {
    let n = sys.b.len();
    if sys.a.len() != n || sys.a.iter().any(|r| r.len() != n) {
        return Err(Error::Assembly(
            "rigid system has inconsistent shape".into(),
        ));
    }
    if sys.a.iter().flatten().chain(&sys.b).any(|v| !v.is_finite()) {
        return Err(Error::Assembly(
            "non-finite entries in the rigid system".into(),
        ));
    }
    sys.conditioning = condition_number(&sys.a);
    if !(sys.conditioning <= MAX_CONDITION) {
        return Err(Error::IllConditioned(sys.conditioning));
    }
    let m = DMatrix::from_fn(n, n, |r, c| sys.a[r][c]);
    let rhs = DVector::from_column_slice(&sys.b);
    let c = m
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Assembly("singular rigid system".into()))?;
    let res = (&m * &c - &rhs).norm();
    if res > 1e-10 * rhs.norm().max(f64::MIN_POSITIVE) && rhs.norm() > 0.0 {
        return Err(Error::Assembly(format!(
            "rigid solve residual {res:e} too large"
        )));
    }
    sys.c = c.iter().cloned().collect();
    Ok(sys.c.clone())
}

/// Stokes solution from the decomposition.
pub fn stokes_solution(cells: &CellSet) -> Result<(Field, RigidSystem)> {
    let mut sys = assemble_rigid_system(cells, None, None)?;
    let c = solve_coefficients(&mut sys)?;
    Ok((cells.reconstruct(&c, None), sys))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Under-relaxation factor in `(0, 1]`.
    pub theta: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50,
            theta: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NsSolution {
    pub field: Field,
    pub system: RigidSystem,
    pub picard_iterations: usize,
    pub final_update: f64,
    pub history: Vec<f64>,
}

/// Picard iteration for the stationary Navier-Stokes problem, starting from
/// the Stokes solution.
pub fn picard_navier_stokes(cells: &CellSet, opts: PicardOptions) -> Result<NsSolution> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 || !(opts.theta > 0.0 && opts.theta <= 1.0) {
        return Err(Error::InvalidConfig(
            "picard needs tol > 0, max_iter > 0, theta in (0, 1]".into(),
        ));
    }
    let (grid, masks) = (cells.grid(), cells.masks());
    let (mut u, mut sys) = stokes_solution(cells)?;
    let mut c = sys.c.clone();
    let mut history = Vec::new();
    for k in 1..=opts.max_iter {
        let g = advect(grid, masks, &u.velocity, &u.velocity);
        let part = cells.particular(&g.scaled(-1.0))?;
        let mut next_sys = assemble_rigid_system(cells, Some(&g), Some(&part.field))?;
        let c_new = solve_coefficients(&mut next_sys)?;
        let target = cells.reconstruct(&c_new, Some(&part.field));
        let mut next = u.scaled(1.0 - opts.theta);
        next.axpy(opts.theta, &target);
        let c_next: Vec<f64> = c
            .iter()
            .zip(&c_new)
            .map(|(a, b)| (1.0 - opts.theta) * a + opts.theta * b)
            .collect();

        let mut du = next.velocity.clone();
        du.axpy(-1.0, &u.velocity);
        let dc = c_next
            .iter()
            .zip(&c)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let cn = c_next.iter().map(|a| a * a).sum::<f64>().sqrt();
        let update = du.norm() / next.velocity.norm().max(f64::MIN_POSITIVE)
            + dc / cn.max(f64::MIN_POSITIVE);
        history.push(update);
        u = next;
        c = c_next;
        next_sys.c = c.clone();
        sys = next_sys;
        if update < opts.tol {
            return Ok(NsSolution {
                field: u,
                system: sys,
                picard_iterations: k,
                final_update: update,
                history,
            });
        }
        if !update.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: history.len(),
        residual: history.last().cloned().unwrap_or(f64::NAN),
    })
}

/// Cell set and Stokes solution for a geometry on a grid built by `rule`.
pub fn solve_geometry(
    geom: &GapGeometry,
    rule: &crate::grid::GridRule,
    phi: BoundaryData,
    params: PhysicsParams,
) -> Result<(CellSet, Field, RigidSystem)> {
    let grid = rule.build(geom)?;
    let cells = solve_cell_problems(geom, &grid, phi, params)?;
    let (field, sys) = stokes_solution(&cells)?;
    Ok((cells, field, sys))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_data_compatibility() {
        assert!(BoundaryData::Mixed.check_compatible().is_ok());
        assert!(BoundaryData::ShearX.check_compatible().is_ok());
        assert!(matches!(
            BoundaryData::ShearY.check_compatible(),
            Err(Error::InvalidConfig(_))
        ));
        let v = BoundaryData::Mixed.eval([1.0, 2.0]);
        assert!((v[0] - (2.0 + 0.5 + 0.3 - 1.2)).abs() < 1e-15);
        assert!((v[1] - (-1.0 - 1.2 + 0.4)).abs() < 1e-15);
    }

    #[test]
    fn identity_system() {
        let mut sys = RigidSystem {
            a: (0..6)
                .map(|r| (0..6).map(|c| if r == c { 1.0 } else { 0.0 }).collect())
                .collect(),
            b: vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            c: vec![0.0; 6],
            conditioning: 0.0,
        };
        assert_eq!(solve_coefficients(&mut sys).unwrap(), sys.b.clone());
        sys.b = vec![0.0; 6];
        assert!(solve_coefficients(&mut sys)
            .unwrap()
            .iter()
            .all(|c| *c == 0.0));
        assert!(sys.a11_positive_definite());
    }

    #[test]
    fn singular_system_rejected() {
        let mut sys = RigidSystem {
            a: vec![vec![1.0; 6]; 6],
            b: vec![1.0; 6],
            c: vec![0.0; 6],
            conditioning: 0.0,
        };
        assert!(matches!(
            solve_coefficients(&mut sys),
            Err(Error::IllConditioned(_))
        ));
    }

    #[test]
    fn cell_indices() {
        assert_eq!(cell_index(1, 1), 0);
        assert_eq!(cell_index(2, 3), 5);
    }
}
