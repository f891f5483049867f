use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate affine warp (|det M| = {det:e})")]
    DegenerateWarp { det: f64 },

    #[error("singular innovation covariance")]
    SingularInnovation,

    #[error("image too small: {width}x{height} (need at least {min}x{min})")]
    ImageTooSmall { width: usize, height: usize, min: usize },

    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("no motion could be estimated: {0}")]
    NoMotion(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("embedding error: {0}")]
    Embedding(String),

    #[error("frame index {got} does not follow {prev}")]
    NonMonotonicFrame { prev: u32, got: u32 },

    #[error("frame {frame}: high-confidence detection {det_index} has no embedding")]
    MissingEmbedding { frame: u32, det_index: usize },

    #[error("duplicate {kind} id {id} in frame {frame}")]
    DuplicateId { kind: &'static str, id: i64, frame: u32 },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
