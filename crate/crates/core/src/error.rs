use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid seed: {0}")]
    InvalidSeed(String),

    #[error("bad dimensions: {0}")]
    BadDimensions(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("zero-norm vector for id `{0}`")]
    ZeroVector(String),

    #[error("rank deficient: requested {requested} components, data has rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("anchor direction has negligible projection ({norm:e}) into the intermediate space")]
    DegenerateAnchor { norm: f64 },

    #[error("library is empty after the quantile-band filter")]
    EmptyAfterFilter,

    #[error("library has {0} entries, retrieval needs at least 3")]
    LibraryTooSmall(usize),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
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
}
