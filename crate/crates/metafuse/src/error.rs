use std::path::PathBuf;

use crate::format::FormatError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data alignment error: {0}")]
    Alignment(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("image error: {0}")]
    Image(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Alignment(_) | Error::Data(_) => 3,
            Error::Numeric(_) => 4,
            Error::Io { .. } | Error::Format { .. } | Error::Csv { .. } | Error::Image(_) => 1,
        }
    }

    /// Prefixes the message with the run that failed.
    pub fn context(self, what: &str) -> Self {
        match self {
            Error::Config(m) => Error::Config(format!("{what}: {m}")),
            Error::Alignment(m) => Error::Alignment(format!("{what}: {m}")),
            Error::Data(m) => Error::Data(format!("{what}: {m}")),
            Error::Numeric(m) => Error::Numeric(format!("{what}: {m}")),
            Error::Image(m) => Error::Image(format!("{what}: {m}")),
            other => other,
        }
    }
}
