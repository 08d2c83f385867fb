use thiserror::Error;

/// Errors raised by the kernel, the analyzer and the runtime.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EcsError {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("entity counter overflow")]
    Capacity,

    #[error("shape error: {0}")]
    Shape(String),

    #[error("too many linearizations: more than {limit} (at least {at_least})")]
    TooManyLinearizations { at_least: u128, limit: usize },

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("runtime error: {0}")]
    Runtime(String),
}

pub type Result<T, E = EcsError> = std::result::Result<T, E>;
