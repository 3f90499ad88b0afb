use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Variants split along the CLI exit-code boundary: [`Error::is_validation`]
/// is true for problems with user inputs, false for runtime failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate gold standard: {0}")]
    DegenerateGold(String),

    #[error("config: {0}")]
    Config(String),

    #[error("results store: {0}")]
    Store(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// True when the error stems from malformed, missing or inconsistent
    /// inputs.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            Error::Parse { .. } | Error::Invalid(_) | Error::Config(_) | Error::DegenerateGold(_) => true,
            Error::InsufficientData(_) | Error::Store(_) => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
