use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("metric is not positive definite")]
    NotPositiveDefinite,

    #[error("fixed-point iteration did not converge after {iterations} iterations")]
    FixedPointNoConvergence { iterations: usize },

    #[error("trajectory diverged")]
    Diverged,

    #[error("update matrix is singular to working precision")]
    SingularUpdate,

    #[error("series has zero variance")]
    DegenerateSeries,

    #[error("series too short: need at least {needed} values, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
