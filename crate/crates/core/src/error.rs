use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("halfplane normal must be non-zero")]
    ZeroNormal,
    #[error("halfplane set must contain at least one constraint")]
    EmptyConstraintSet,
    #[error("no vertices left after deduplication")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("convex-combination weights rejected: {0}")]
    WeightContract(String),
    #[error("polytope has {count} vertices but the safe layer holds {max}")]
    TooManyVertices { count: usize, max: usize },
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing run: {0}")]
    MissingRun(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
