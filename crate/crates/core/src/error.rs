use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric input lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("root search failed on [{lo}, {hi}]: {reason}")]
    Convergence { lo: f64, hi: f64, reason: String },

    /// Invalid configuration; `field` names the offending key.
    #[error("invalid config `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("integrity error in {path}: {message}")]
    Integrity { path: PathBuf, message: String },

    #[error("unsupported arrival file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("gate grid invalid: {0}")]
    Grid(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Grid(_) => 2,
            Error::Io { .. } | Error::Integrity { .. } | Error::Version { .. } => 3,
            Error::Domain(_) | Error::Convergence { .. } | Error::Empty(_) => 4,
        }
    }
}
