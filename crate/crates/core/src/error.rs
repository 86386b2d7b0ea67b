use thiserror::Error;

/// Errors raised across the search framework.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The external evaluator answered with something the protocol does not allow.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// The external evaluator could not be reached, timed out or exited.
    #[error("transport error: {0}")]
    Transport(String),

    /// A statistical test is undefined for the given data.
    #[error("undefined test: {0}")]
    UndefinedTest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
