use std::io;

use thiserror::Error;

/// Errors raised by the simulator and its configuration layer.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a model invariant. `key` names the offending
    /// configuration key (or parameter) so the caller can point at it.
    #[error("invalid value for {key}: {message}")]
    Config { key: String, message: String },

    /// Malformed configuration text.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Caller asked for something that does not exist.
    #[error("usage: {0}")]
    Usage(String),

    /// Non-finite or malformed numeric input to the decision kernel.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
