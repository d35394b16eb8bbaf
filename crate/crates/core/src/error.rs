use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data violates a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// Malformed input at a known line of the source.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    /// An operation was invoked on an object that is not ready for it.
    #[error("state error: {0}")]
    State(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
