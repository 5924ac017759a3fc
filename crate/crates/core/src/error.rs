use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A sampler gave up (e.g. rejection budget exhausted). Carries a
    /// diagnostic message with the estimated acceptance probability.
    #[error("sampler exhausted: {0}")]
    Exhausted(String),
    /// Malformed serialized input.
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
