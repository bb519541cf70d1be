use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: String,
        got: String,
        context: &'static str,
    },

    #[error("grid {nx}x{ny} cannot resolve max wavenumber {requested}: need at least {needed} points per direction")]
    ResolutionTooSmall {
        nx: usize,
        ny: usize,
        requested: usize,
        needed: usize,
    },

    #[error("time grids do not match: {0}")]
    TimeGridMismatch(String),

    #[error("eigensolve failed: {0}")]
    Eigensolve(String),

    #[error("quadrature under-resolution: advection matrix skew norm {skew:.3e} exceeds tolerance {tol:.3e}")]
    SkewToleranceExceeded { skew: f64, tol: f64 },

    #[error("characteristic foot left the domain by {excess:.3e} (beyond interpolation reach); velocity field is corrupted")]
    FootOutOfDomain { excess: f64 },

    #[error("Picard iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
