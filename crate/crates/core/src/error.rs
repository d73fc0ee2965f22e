use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: {axis} mismatch (expected {expected}, got {found})")]
    Shape {
        op: &'static str,
        axis: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{op}: dilated kernel span {span} exceeds padded {axis} extent {padded}")]
    KernelTooLarge {
        op: &'static str,
        axis: &'static str,
        span: usize,
        padded: usize,
    },

    #[error("{op}: non-finite value encountered")]
    NonFinite { op: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("signal too short: {len} samples, at least {min} required")]
    TooShort { len: usize, min: usize },

    #[error("look-ahead of {requested} frames exceeds the maximum of {max} for this architecture")]
    LookAhead { requested: usize, max: usize },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("length mismatch in pair {pair}: noisy has {noisy} samples, clean has {clean}")]
    PairLength {
        pair: String,
        noisy: usize,
        clean: usize,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("wav error on {path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
