use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("design matrix does not have full row rank (rank {rank}, rows {rows})")]
    RankDeficient { rank: usize, rows: usize },

    #[error("Newton solver did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDidNotConverge { iterations: usize, residual: f64 },

    #[error("power iteration did not converge after {iterations} iterations (last estimate {estimate})")]
    PowerIterationDidNotConverge { iterations: usize, estimate: f64 },

    #[error("{what} of size {size} exceeds the dense limit {limit}; subsample the trajectory instead")]
    TooLargeForDense { what: &'static str, size: usize, limit: usize },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
