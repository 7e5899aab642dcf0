use thiserror::Error;

/// Errors raised across the library.
///
/// Variants are grouped by how the command line reports them: bad input maps to
/// exit code 2, numerical breakdown to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point lies outside the neck region: {0}")]
    OutOfNeck(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("unsupported request: {0}")]
    Unsupported(String),
    #[error("invalid step: {0}")]
    InvalidStep(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("measurement error: {0}")]
    Measurement(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("matrix is ill-conditioned (condition estimate {0:.3e})")]
    IllConditioned(f64),
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::Assembly(_)
                | Error::IllConditioned(_)
                | Error::NotPositiveDefinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
