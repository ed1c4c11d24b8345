//! Shared error type for the library.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by library operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A text input (observable file, dataset file, config) failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Input lengths or dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A size cap protecting dense enumeration was exceeded.
    #[error("capacity exceeded: {what} requires {required}, cap is {cap}")]
    Capacity {
        what: &'static str,
        required: usize,
        cap: usize,
    },

    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The rotated amplitude of a measurement record vanished; its
    /// quasi-probability average is undefined.
    #[error("degenerate rotated amplitude (log |psi| = {log_abs})")]
    DegenerateAmplitude { log_abs: f64 },

    /// A gradient contained NaN or infinite components; the optimizer
    /// step was rejected.
    #[error("non-finite gradient component at index {index}")]
    NonFiniteGradient { index: usize },

    /// A checkpoint file was corrupt or carried an unsupported version.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Underlying I/O failure.
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

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
