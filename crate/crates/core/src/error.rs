use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("time step must be positive, got {0}")]
    NonPositiveTimeStep(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular implicit system at pivot {0}")]
    SingularMatrix(usize),

    #[error("non-finite state (simulation blew up)")]
    NonFiniteState,

    #[error("all {0} rollouts of the batch blew up")]
    AllRolloutsBlewUp(usize),

    #[error("non-finite gradient: {0}")]
    NonFiniteGradient(String),

    #[error("degenerate estimator: {0}")]
    DegenerateEstimator(String),

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("invalid config field `{field}`: {reason}")]
    ConfigValidation { field: String, reason: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ConfigValidation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
