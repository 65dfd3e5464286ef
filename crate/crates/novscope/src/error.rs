use thiserror::Error;

pub type Result<T> = std::result::Result<T, NovError>;

#[derive(Debug, Error)]
pub enum NovError {
    /// Bad user-supplied parameters, config keys, or generator specs.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Caller-bug class errors: out-of-range indices, shape mismatches.
    #[error("internal contract violated: {0}")]
    Contract(String),

    /// The digital twin has no ground-truth scalarizer map to replay.
    #[error("oracle unavailable: dataset carries no scalarizer map")]
    OracleUnavailable,

    /// Kernel matrix stayed non-PD through the whole jitter escalation.
    #[error("kernel matrix not positive definite (jitter escalated to {max_jitter:e})")]
    NotPositiveDefinite { max_jitter: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed binary container or CSV payload.
    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),
}

impl NovError {
    /// Stable process exit codes: config=2, i/o=3, numerical=4.
    pub fn exit_code(&self) -> i32 {
        match self {
            NovError::InvalidInput(_) | NovError::Config(_) => 2,
            NovError::Io(_) | NovError::Format(_) => 3,
            NovError::NotPositiveDefinite { .. } => 4,
            NovError::Contract(_) | NovError::OracleUnavailable => 2,
        }
    }
}
