use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("value count mismatch: dims require {expected} values, found {found}")]
    ValueCount { expected: usize, found: usize },

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is empty")]
    EmptyGraph,

    #[error("graph is disconnected ({0} components)")]
    Disconnected(usize),

    #[error("invalid merge tree: {0}")]
    InvalidTree(String),

    #[error("merge tree is not paired")]
    Unpaired,

    #[error("orientation mismatch: {0} vs {1}")]
    OrientationMismatch(crate::Orientation, crate::Orientation),

    #[error("cost matrix has no finite perfect assignment")]
    NoFiniteAssignment,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("mapping does not cover both trees: {0}")]
    Coverage(String),

    #[error("oracle size guard exceeded: trees have {0} and {1} nodes (max 8)")]
    OracleTooLarge(usize, usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
