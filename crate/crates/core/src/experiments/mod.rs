//! Run configuration, gap-width sweeps, rate fits, invariant checks and
//! their CSV/JSON reports.

mod checks;
mod config;
mod fit;
mod report;
mod sweep;

pub use checks::{
    default_geometries, invariant_suite, invariant_suite_with, residual_ratio_max, CheckEntry,
    CheckReport, CheckStatus, Mutation,
};
pub use config::{GeometryConfig, PhysicsMode, RunConfig};
pub use fit::{fit_rate, FitResult};
pub use report::{load_report, write_outputs, write_sweep_csv, ChecksFile, CSV_COLUMNS};
pub use sweep::{
    grid_change, run_sweep, solve_case, CaseFailure, CaseOutput, SweepReport, SweepRow, Verdict,
    GAP_FLOOR, GRID_CHANGE_LIMIT, SCHEMA_VERSION,
};
