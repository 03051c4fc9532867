use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by callers that map errors to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{entity}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch {
        entity: String,
        expected: usize,
        found: usize,
    },

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("{entity}: feature contains a non-finite value")]
    NonFinite { entity: String },

    #[error("unknown frame id `{0}`")]
    UnknownFrame(String),

    #[error("unknown video id `{0}`")]
    UnknownVideo(String),

    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),

    #[error("invalid ground truth: {0}")]
    InvalidGroundTruth(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("coefficient vector has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("coefficient {index} is negative ({value})")]
    NegativeCoefficient { index: usize, value: f64 },

    #[error("graph needs at least {required} nodes, got {found}")]
    TooFewNodes { required: usize, found: usize },

    #[error("graph node sets differ")]
    NodeMismatch,

    #[error("consistency needs at least 2 annotators, got {0}")]
    TooFewAnnotators(usize),

    #[error("empty vocabulary")]
    EmptyVocabulary,

    #[error("summary does not belong to this corpus: {0}")]
    SummaryMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidConfig(_) => ErrorClass::Config,
            Error::Numerical(_) => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
