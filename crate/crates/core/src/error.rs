use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FgatError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("split ratios {0:?} must be positive and sum to 1")]
    InvalidRatios([f64; 3]),
    #[error("split produced an empty {0} partition; graph too small for the ratios")]
    EmptySplit(&'static str),
    #[error("requested {requested} negative pairs but only {available} are eligible")]
    InsufficientPairs { requested: usize, available: usize },
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("node index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("backward already run on this tape")]
    BackwardTwice,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = FgatError> = std::result::Result<T, E>;
