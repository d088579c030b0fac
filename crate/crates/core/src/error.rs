use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("span/resolution ratio {requested} exceeds the configured limit of {limit}")]
    Capacity { requested: usize, limit: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("temporal gate `{0}` lies entirely outside the time grid")]
    GateOutsideGrid(&'static str),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("time-tag stream on channel {channel} is not sorted at index {index}")]
    UnsortedStream { channel: u8, index: usize },

    #[error("{section}: {reason}")]
    Invariant { section: &'static str, reason: String },

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed matrix file: {0}")]
    Format(String),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end: 1 for
    /// usage/configuration problems, 2 for numerical or domain failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::Invariant { .. }
            | Error::InvalidParameter { .. }
            | Error::Io { .. }
            | Error::Format(_) => 1,
            _ => 2,
        }
    }
}
