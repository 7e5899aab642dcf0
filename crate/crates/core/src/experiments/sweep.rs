use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{PhysicsMode, RunConfig};
use super::fit::{fit_rate, FitResult};
use crate::decomposition::{
    picard_navier_stokes, solve_cell_problems, stokes_solution, RigidSystem,
};
use crate::error::{Error, Result};
use crate::grid::{Field, GapSampler, GridRule, StaggeredGrid};
use crate::stokes::max_gradient_difference;

/// Bumped whenever a column of the CSV or a key of the JSON report changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Coefficient gaps below this are degenerate by symmetry and not fitted.
pub const GAP_FLOOR: f64 = 1e-12;

/// Relative change of the gap gradient tolerated under grid refinement.
pub const GRID_CHANGE_LIMIT: f64 = 0.05;

/// Measurements at one gap width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub nx: usize,
    pub ny: usize,
    pub h_min: f64,
    pub max_gradient: f64,
    pub centreline_gradient: f64,
    pub pressure_oscillation: f64,
    pub max_stress: f64,
    pub coefficient_gaps: [f64; 3],
    pub a11_diagonal: [f64; 3],
    pub a11_positive_definite: bool,
    pub stokes_system: RigidSystem,
    pub ns_gradient_difference: Option<f64>,
    pub ns_max_gradient: Option<f64>,
    pub ns_coefficients: Option<Vec<f64>>,
    pub picard_iterations: Option<usize>,
    /// Relative change of `max_gradient` on the twice-refined grid.
    pub grid_change: Option<f64>,
    pub grid_converged: Option<bool>,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFailure {
    pub eps: f64,
    pub stage: String,
    pub message: String,
    pub solver_failure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub config: RunConfig,
    /// Ordered by `eps` descending.
    pub rows: Vec<SweepRow>,
    pub failures: Vec<CaseFailure>,
    pub partial: bool,
    pub fits: BTreeMap<String, FitResult>,
    /// Series left out of the fits, with the reason.
    pub skipped: Vec<String>,
    /// Gap gradient increases as `eps` decreases.
    pub monotone_gradient: bool,
    pub verdicts: Vec<Verdict>,
}

/// Fields behind one row, for callers that want to export them.
#[derive(Debug)]
pub struct CaseOutput {
    pub row: SweepRow,
    pub grid: StaggeredGrid,
    pub stokes: Field,
    pub navier_stokes: Option<Field>,
    pub ns_error: Option<Error>,
}

fn refined(rule: &GridRule) -> GridRule {
    match *rule {
        GridRule::Uniform {
            cells_per_eps,
            max_n,
        } => GridRule::Uniform {
            cells_per_eps: 2.0 * cells_per_eps,
            max_n,
        },
        GridRule::GapAdapted(mut r) => {
            r.refine *= 2.0;
            GridRule::GapAdapted(r)
        }
    }
}

/// Gap gradient on the grid of `rule`, excluding `margin_cells` cells next to the solids.
fn stokes_gap_gradient(
    cfg: &RunConfig,
    eps: f64,
    rule: &GridRule,
    margin_cells: usize,
) -> Result<f64> {
    let geom = cfg.geometry.build(eps)?;
    let grid = rule.build(&geom)?;
    let cells = solve_cell_problems(&geom, &grid, cfg.boundary, cfg.params())?;
    let (field, _) = stokes_solution(&cells)?;
    let sampler = GapSampler::new(&geom, &grid, cells.masks(), cfg.radius, margin_cells)?;
    Ok(sampler.max_gradient(&grid, &field.velocity))
}

/// Gap gradient on the grid with every spacing halved. The margin doubles so
/// that both grids sample the same physical region.
fn refined_gap_gradient(cfg: &RunConfig, eps: f64) -> Result<f64> {
    stokes_gap_gradient(cfg, eps, &refined(&cfg.grid), 2 * cfg.margin_cells)
}

/// Solves one gap width: Stokes always, Navier-Stokes when configured.
///
/// A Picard failure does not discard the Stokes measurements; it is returned
/// in `ns_error`.
pub fn solve_case(cfg: &RunConfig, eps: f64) -> Result<CaseOutput> {
    let start = Instant::now();
    let geom = cfg.geometry.build(eps)?;
    let grid = cfg.grid.build(&geom)?;
    let cells = solve_cell_problems(&geom, &grid, cfg.boundary, cfg.params())?;
    let (stokes, sys) = stokes_solution(&cells)?;
    let sampler = GapSampler::new(&geom, &grid, cells.masks(), cfg.radius, cfg.margin_cells)?;
    let mu = cfg.mu;
    let mut row = SweepRow {
        eps,
        nx: grid.nx(),
        ny: grid.ny(),
        h_min: grid.h_min(),
        max_gradient: sampler.max_gradient(&grid, &stokes.velocity),
        centreline_gradient: sampler.centreline_gradient(&grid, &stokes.velocity),
        pressure_oscillation: sampler.pressure_oscillation(&grid, &stokes.pressure),
        max_stress: sampler.max_stress(&grid, &stokes, mu),
        coefficient_gaps: sys.coefficient_gaps(),
        a11_diagonal: sys.a11_diagonal(),
        a11_positive_definite: sys.a11_positive_definite(),
        stokes_system: sys,
        ns_gradient_difference: None,
        ns_max_gradient: None,
        ns_coefficients: None,
        picard_iterations: None,
        grid_change: None,
        grid_converged: None,
        runtime_s: 0.0,
    };
    let mut navier_stokes = None;
    let mut ns_error = None;
    if cfg.mode == PhysicsMode::NavierStokes {
        match picard_navier_stokes(&cells, cfg.picard) {
            Ok(ns) => {
                row.ns_gradient_difference = Some(max_gradient_difference(
                    &grid,
                    sampler.cells(),
                    &ns.field.velocity,
                    &stokes.velocity,
                ));
                row.ns_max_gradient = Some(sampler.max_gradient(&grid, &ns.field.velocity));
                row.ns_coefficients = Some(ns.system.c.clone());
                row.picard_iterations = Some(ns.picard_iterations);
                navier_stokes = Some(ns.field);
            }
            Err(e) => ns_error = Some(e),
        }
    }
    drop(cells);
    if cfg.convergence_check {
        let fine = refined_gap_gradient(cfg, eps)?;
        let change = (fine - row.max_gradient).abs() / fine.abs().max(f64::MIN_POSITIVE);
        row.grid_change = Some(change);
        row.grid_converged = Some(change < GRID_CHANGE_LIMIT);
    }
    row.runtime_s = start.elapsed().as_secs_f64();
    Ok(CaseOutput {
        row,
        grid,
        stokes,
        navier_stokes,
        ns_error,
    })
}

/// Relative change of the Stokes gap gradient between the configured grid
/// and the grid with every spacing halved.
pub fn grid_change(cfg: &RunConfig, eps: f64) -> Result<f64> {
    let coarse = stokes_gap_gradient(cfg, eps, &cfg.grid, cfg.margin_cells)?;
    let fine = refined_gap_gradient(cfg, eps)?;
    Ok((fine - coarse).abs() / fine.abs().max(f64::MIN_POSITIVE))
}

/// Runs every gap width in the configuration. Cases run in parallel; rows are
/// reported in the order of `eps_list` whatever the completion order.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let outcomes: Vec<(f64, Result<CaseOutput>)> = cfg
        .eps_list
        .par_iter()
        .map(|&eps| (eps, solve_case(cfg, eps)))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (eps, out) in outcomes {
        match out {
            Ok(case) => {
                if let Some(e) = case.ns_error {
                    failures.push(failure(eps, "navier_stokes", &e));
                }
                rows.push(case.row);
            }
            Err(e) => failures.push(failure(eps, "stokes", &e)),
        }
    }
    Ok(SweepReport::assemble(cfg.clone(), rows, failures))
}

fn failure(eps: f64, stage: &str, e: &Error) -> CaseFailure {
    CaseFailure {
        eps,
        stage: stage.into(),
        message: e.to_string(),
        solver_failure: e.is_solver_failure(),
    }
}

fn within(x: f64, centre: f64, half: f64) -> bool {
    (x - centre).abs() <= half
}

impl SweepReport {
    /// Fits every series and evaluates the sweep criteria.
    pub fn assemble(
        config: RunConfig,
        mut rows: Vec<SweepRow>,
        failures: Vec<CaseFailure>,
    ) -> Self {
        rows.sort_by(|a, b| b.eps.total_cmp(&a.eps));
        let partial = !failures.is_empty();
        let monotone_gradient = rows
            .windows(2)
            .all(|w| w[1].max_gradient > w[0].max_gradient);
        let mut report = SweepReport {
            schema_version: SCHEMA_VERSION,
            config,
            rows,
            failures,
            partial,
            fits: BTreeMap::new(),
            skipped: Vec::new(),
            monotone_gradient,
            verdicts: Vec::new(),
        };
        report.fit_all();
        report.verdicts = report.judge();
        report
    }

    /// Named series, one value per row (or `None` when absent in a row).
    pub fn series(&self) -> Vec<(String, Vec<Option<f64>>)> {
        let col =
            |f: &dyn Fn(&SweepRow) -> Option<f64>| self.rows.iter().map(f).collect::<Vec<_>>();
        let mut out = vec![
            ("max_gradient".to_string(), col(&|r| Some(r.max_gradient))),
            (
                "centreline_gradient".into(),
                col(&|r| Some(r.centreline_gradient)),
            ),
            (
                "pressure_oscillation".into(),
                col(&|r| Some(r.pressure_oscillation)),
            ),
            ("max_stress".into(), col(&|r| Some(r.max_stress))),
        ];
        for a in 0..3 {
            out.push((
                format!("coefficient_gap_{}", a + 1),
                col(&|r| Some(r.coefficient_gaps[a])),
            ));
        }
        for a in 0..3 {
            out.push((
                format!("a11_{0}{0}", a + 1),
                col(&|r| Some(r.a11_diagonal[a])),
            ));
        }
        out.push((
            "ns_gradient_difference".into(),
            col(&|r| r.ns_gradient_difference),
        ));
        out
    }

    fn fit_all(&mut self) {
        if self.rows.len() < 3 {
            return;
        }
        let eps: Vec<f64> = self.rows.iter().map(|r| r.eps).collect();
        for (name, values) in self.series() {
            if values.iter().all(|v| v.is_none()) {
                continue;
            }
            let floor = if name.starts_with("coefficient_gap") {
                GAP_FLOOR
            } else {
                0.0
            };
            if let Some((e, v)) = eps
                .iter()
                .zip(&values)
                .find(|(_, v)| !matches!(v, Some(x) if *x > floor))
            {
                self.skipped.push(format!(
                    "{name}: value {v:?} at eps = {e} is not above {floor:e}"
                ));
                continue;
            }
            let pairs: Vec<(f64, f64)> = eps
                .iter()
                .zip(&values)
                .map(|(e, v)| (*e, v.unwrap()))
                .collect();
            match fit_rate(&pairs) {
                Ok(fit) => {
                    self.fits.insert(name, fit);
                }
                Err(e) => self.skipped.push(format!("{name}: {e}")),
            }
        }
    }

    fn slope(&self, name: &str) -> Option<f64> {
        self.fits.get(name).map(|f| f.slope)
    }

    /// Verdicts for the sweep-level criteria (4 to 8). Nothing is judged on
    /// fewer than three rows; a partial sweep fails every criterion.
    fn judge(&self) -> Vec<Verdict> {
        if self.rows.len() < 3 {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut push = |criterion: u8, name: &str, passed: bool, detail: String| {
            let (passed, detail) = if self.partial {
                (
                    false,
                    format!(
                        "partial sweep ({} failed cases); {detail}",
                        self.failures.len()
                    ),
                )
            } else {
                (passed, detail)
            };
            out.push(Verdict {
                criterion,
                name: name.into(),
                passed,
                detail,
            });
        };
        let fmt = |s: Option<f64>| s.map_or("n/a".to_string(), |v| format!("{v:.3}"));

        let g = self.slope("max_gradient");
        let c = self.slope("centreline_gradient");
        let ratio_ok = self.rows.iter().all(|r| {
            let q = r.max_gradient / r.centreline_gradient;
            q.is_finite() && (0.1..=10.0).contains(&q)
        });
        let ok = g.is_some_and(|s| within(s, -0.5, 0.15))
            && c.is_some_and(|s| within(s, -0.5, 0.15))
            && ratio_ok;
        push(
            4,
            "gradient blow-up rate",
            ok,
            format!("slopes: gap max {}, centreline {} (want -0.5 +- 0.15); centreline within 10x of gap max: {ratio_ok}", fmt(g), fmt(c)),
        );

        let p = self.slope("pressure_oscillation");
        push(
            5,
            "pressure oscillation rate",
            p.is_some_and(|s| within(s, -0.5, 0.2)),
            format!("slope {} (want -0.5 +- 0.2)", fmt(p)),
        );

        let mut ok = true;
        let mut parts = Vec::new();
        let mut fitted = 0;
        for (a, centre, half) in [(1, 0.5, 0.2), (2, 1.5, 0.3), (3, 0.5, 0.2)] {
            let name = format!("coefficient_gap_{a}");
            match self.slope(&name) {
                Some(s) => {
                    fitted += 1;
                    ok &= within(s, centre, half);
                    parts.push(format!("alpha={a}: {s:.3} (want {centre} +- {half})"));
                }
                None => parts.push(format!("alpha={a}: skipped")),
            }
        }
        push(
            6,
            "coefficient gap scalings",
            ok && fitted > 0,
            parts.join("; "),
        );

        let pd = self.rows.iter().all(|r| r.a11_positive_definite);
        let mut ok = pd;
        let mut parts = Vec::new();
        for (a, centre) in [(1, -0.5), (2, -1.5), (3, -0.5)] {
            let s = self.slope(&format!("a11_{a}{a}"));
            ok &= s.is_some_and(|s| within(s, centre, 0.3));
            parts.push(format!("a11^{a}{a}: {} (want {centre} +- 0.3)", fmt(s)));
        }
        parts.push(format!("positive definite at every eps: {pd}"));
        push(7, "matrix entry scalings", ok, parts.join("; "));

        if self.config.mode == PhysicsMode::NavierStokes {
            let diffs: Vec<f64> = self
                .rows
                .iter()
                .filter_map(|r| r.ns_gradient_difference)
                .collect();
            let complete = diffs.len() == self.rows.len();
            let lo = diffs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = diffs.iter().cloned().fold(0.0, f64::max);
            let spread = hi / lo;
            let first = self
                .rows
                .first()
                .map(|r| r.max_gradient)
                .unwrap_or(f64::NAN);
            let last = self.rows.last().map(|r| r.max_gradient).unwrap_or(f64::NAN);
            let growth = last / first;
            let picard_max = self
                .rows
                .iter()
                .filter_map(|r| r.picard_iterations)
                .max()
                .unwrap_or(0);
            let converged = complete && picard_max <= 50;
            let ok = complete && spread < 3.0 && growth >= 2.5 && converged;
            push(
                8,
                "navier-stokes vs stokes boundedness",
                ok,
                format!(
                    "difference max/min {spread:.3} (want < 3); stokes gradient growth {growth:.3} (want >= 2.5); picard converged everywhere: {converged} (max {picard_max} iterations)"
                ),
            );
        }
        out
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    /// Rows whose refinement study moved the gap gradient by 5% or more.
    pub fn unconverged_rows(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.grid_converged == Some(false))
            .map(|r| r.eps)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::RigidSystem;

    fn row(eps: f64) -> SweepRow {
        let s = eps.sqrt();
        SweepRow {
            eps,
            nx: 64,
            ny: 64,
            h_min: 0.01,
            max_gradient: 2.0 / s,
            centreline_gradient: 1.5 / s,
            pressure_oscillation: 3.0 / s,
            max_stress: 4.0 / s,
            coefficient_gaps: [s, eps * s, 0.0],
            a11_diagonal: [1.0 / s, 1.0 / (eps * s), 2.0 / s],
            a11_positive_definite: true,
            stokes_system: RigidSystem {
                a: vec![],
                b: vec![],
                c: vec![],
                conditioning: 1.0,
            },
            ns_gradient_difference: Some(1.0 + eps),
            ns_max_gradient: None,
            ns_coefficients: None,
            picard_iterations: Some(12),
            grid_change: None,
            grid_converged: None,
            runtime_s: 0.0,
        }
    }

    #[test]
    fn exact_laws_pass_and_degenerate_gap_is_skipped() {
        let cfg = RunConfig::desk_sweep(PhysicsMode::NavierStokes);
        let rows = vec![row(0.05), row(0.2), row(0.025), row(0.1)];
        let rep = SweepReport::assemble(cfg, rows, vec![]);
        assert_eq!(
            rep.rows.iter().map(|r| r.eps).collect::<Vec<_>>(),
            vec![0.2, 0.1, 0.05, 0.025]
        );
        assert!((rep.fits["max_gradient"].slope + 0.5).abs() < 1e-12);
        assert!((rep.fits["coefficient_gap_2"].slope - 1.5).abs() < 1e-12);
        assert!(!rep.fits.contains_key("coefficient_gap_3"));
        assert_eq!(rep.skipped.len(), 1);
        assert!(rep.monotone_gradient);
        assert!(rep.all_passed(), "{:#?}", rep.verdicts);
        assert_eq!(rep.verdicts.len(), 5);
    }

    #[test]
    fn single_row_has_no_fits() {
        let rep = SweepReport::assemble(
            RunConfig::desk_sweep(PhysicsMode::Stokes),
            vec![row(0.2)],
            vec![],
        );
        assert!(rep.fits.is_empty() && rep.verdicts.is_empty());
    }

    #[test]
    fn partial_sweep_fails_every_verdict() {
        let fail = CaseFailure {
            eps: 0.3,
            stage: "stokes".into(),
            message: "x".into(),
            solver_failure: true,
        };
        let rep = SweepReport::assemble(
            RunConfig::desk_sweep(PhysicsMode::Stokes),
            vec![row(0.2), row(0.1), row(0.05)],
            vec![fail],
        );
        assert!(rep.partial);
        assert!(rep.verdicts.iter().all(|v| !v.passed));
    }
}
