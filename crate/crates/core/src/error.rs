use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is out of its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Inputs have mismatched shapes or band counts.
    #[error("structural mismatch: {0}")]
    Structural(String),

    /// The input carries no usable signal (zero variance, singular covariance, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Io {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// Structural mismatches are caller mistakes and share the parameter code.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Structural(_) => 1,
            Error::Io { .. } => 2,
            Error::Degenerate(_) => 3,
        }
    }
}
