use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("contour is empty")]
    EmptyContour,
    #[error("ground-truth mask is empty")]
    EmptyGroundTruth,
    #[error("point ({row}, {col}) outside {height}x{width} image")]
    OutOfBounds {
        row: i64,
        col: i64,
        height: usize,
        width: usize,
    },
    #[error("iteration {iteration} outside schedule of {total} iterations")]
    OutOfRange { iteration: u64, total: u64 },
    #[error("image {height}x{width} is smaller than the {required}x{required} crop")]
    TooSmall {
        height: usize,
        width: usize,
        required: usize,
    },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("traces use different click budgets ({0} vs {1})")]
    MixedBudget(usize, usize),
    #[error("non-finite loss at iteration {iteration}: {detail}")]
    NonFiniteLoss { iteration: u64, detail: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint does not match: {0}")]
    CheckpointMismatch(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
