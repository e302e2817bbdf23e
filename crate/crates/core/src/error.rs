use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A computation would exceed a configured enumeration or search cap.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// The input admits no meaningful answer (for example every candidate
    /// has infinite cross-entropy).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A text file did not match its expected format.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A verification step found an inconsistency.
    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
