//! Two rigid particles at distance `eps`: auxiliary gap fields, predicted
//! blow-up rates, and a penalized staggered-grid solver for measuring them.

// `!(x < tol)` is deliberate: NaN must fail every tolerance test.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod decomposition;
mod dual;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod grid;
pub mod keller;
pub mod linalg;
pub mod rates;
pub mod stokes;

pub use decomposition::{BoundaryData, PhysicsParams, PicardOptions, RigidSystem};
pub use error::{Error, Result};
pub use experiments::{
    fit_rate, invariant_suite, run_sweep, CheckReport, CheckStatus, FitResult, PhysicsMode,
    RunConfig, SweepReport,
};
pub use geometry::{GapGeometry, GapProfile, OuterDomain, Region};
pub use grid::{Field, GridRule, MaskSet, StaggeredGrid, Velocity};
pub use keller::{aux_field, keller, keller_gradient, AuxiliaryField, ResidualSample, RigidMode};
pub use rates::{predicted_lower, predicted_scaling, predicted_upper, Quantity, RatePrediction};
pub use stokes::{SolveStats, SolverOptions};
