use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("record {id:?} has an empty caption at index {index}")]
    EmptyCaption { id: String, index: usize },

    #[error("invalid {what}: {message}")]
    Invalid { what: &'static str, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("unknown id {0:?}")]
    UnknownId(String),

    #[error("vector is all zeros")]
    ZeroVector,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("id sets differ; only in A: {only_a:?}; only in B: {only_b:?}")]
    IdSetMismatch {
        only_a: Vec<String>,
        only_b: Vec<String>,
    },

    #[error("rankings are not comparable: {0}")]
    RankingMismatch(String),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("unknown transform {0:?}")]
    UnknownTransform(String),

    #[error("no transforms selected")]
    NoTransforms,

    #[error("unknown fault id {0:?}")]
    UnknownFault(String),

    #[error("unknown case {0}")]
    UnknownCase(String),

    #[error("missing caption for {0:?}")]
    MissingCaption(String),

    #[error("remote scorer: {message}")]
    Remote { message: String, retryable: bool },

    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Io,
    Remote,
}

impl Error {
    pub fn invalid(what: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } | Error::Image { .. } => ErrorClass::Io,
            Error::Remote { .. } => ErrorClass::Remote,
            _ => ErrorClass::Validation,
        }
    }
}
