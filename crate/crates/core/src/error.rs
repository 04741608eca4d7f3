use thiserror::Error;

/// Errors raised by the simulator and the per-frame solvers.
#[derive(Debug, Error)]
pub enum OffloadError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("instance too large: {what} = {got} exceeds limit {limit}")]
    TooLarge {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    #[error("trace error: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("config serialize error: {0}")]
    ConfigWrite(#[from] toml::ser::Error),
}

pub type Result<T> = std::result::Result<T, OffloadError>;
