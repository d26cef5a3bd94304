//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the emphasis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A line of an input file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Input data violates an invariant (range, length, uniqueness).
    #[error("validation error: {0}")]
    Validation(String),

    /// An argument is outside the operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A numeric quantity is not finite where it must be.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
