use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by matrix validation, measure evaluation, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Inputs have incompatible shapes for the requested operation.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The measure is undefined on this input (e.g. zero-trace kernel).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A matrix required to be positive semidefinite is not.
    #[error("not positive semidefinite: {0}")]
    NotPsd(String),

    /// A decomposition failed or a value left its valid domain by more
    /// than round-off allows.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed text input, with a 1-based line/column location.
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub fn dimension_mismatch(context: impl Into<String>) -> Self {
        Error::DimensionMismatch(context.into())
    }

    pub fn degenerate(context: impl Into<String>) -> Self {
        Error::DegenerateInput(context.into())
    }

    pub fn not_psd(context: impl Into<String>) -> Self {
        Error::NotPsd(context.into())
    }

    pub fn numerical(context: impl Into<String>) -> Self {
        Error::Numerical(context.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error category.
    ///
    /// 2 = parse/I-O, 3 = dimension mismatch, 4 = degenerate input,
    /// 5 = numerical/NotPsd. Code 6 (verification failure) is not an
    /// error variant; it is decided from report contents.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Io { .. } => 2,
            Error::DimensionMismatch(_) => 3,
            Error::DegenerateInput(_) => 4,
            Error::NotPsd(_) | Error::Numerical(_) => 5,
        }
    }
}
