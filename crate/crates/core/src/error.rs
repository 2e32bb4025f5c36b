use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or configuration, detected before any training work.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("vocabulary merge produced no words ({0} mode)")]
    EmptyVocabulary(&'static str),

    #[error("no vocabulary proposals to merge")]
    NoProposals,

    #[error("proposals disagree on {what}: {a} vs {b}")]
    ProposalMismatch { what: &'static str, a: usize, b: usize },

    #[error("index {index} out of range for vocabulary of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("negative table needs at least one positive count")]
    NoPositiveCounts,

    #[error("zero vector has no cosine distance")]
    ZeroVector,

    #[error("word not in vocabulary: {0}")]
    OutOfVocabulary(String),

    #[error("dataset for node {node} is too short to yield training pairs")]
    DatasetTooShort { node: usize },

    #[error("node {node} failed in round {round}: {reason}")]
    NodeFailure { node: usize, round: u64, reason: String },

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors a caller could have avoided by passing different
    /// arguments (bad flags, mismatched counts, missing words).
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::NoProposals | Error::ProposalMismatch { .. })
    }
}
