use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the testbed.
#[derive(Debug, Error)]
pub enum Error {
    /// Input rejected because its shape or dimensions do not match the model.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Input rejected for a reason other than shape.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A NaN or infinity appeared. `param_index` names the first offending
    /// parameter when one exists.
    #[error("numerical failure ({context}){}", .param_index.map(|i| format!(" at parameter {i}")).unwrap_or_default())]
    Numerical {
        context: String,
        param_index: Option<usize>,
    },

    /// A configuration value violates a precondition.
    #[error("configuration error: {0}")]
    Config(String),

    /// Aggregation could not be performed.
    #[error("aggregation error: {0}")]
    Aggregation(String),

    /// A metric is undefined for its inputs (e.g. ASR with zero baseline accuracy).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Binary format errors (IDX files, checkpoints).
    #[error("{path}: {kind}")]
    Parse { path: PathBuf, kind: ParseError },

    /// A federation round failed inside one client.
    #[error("round {round}, client {client}: {source}")]
    Client {
        round: usize,
        client: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parse failures of the binary formats, each naming the byte offset at which
/// the problem was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("bad magic number {found:#010x} at byte 0 (expected {expected:#010x})")]
    BadMagic { found: u32, expected: u32 },

    #[error("file truncated at byte {offset}: needed {needed} more bytes")]
    Truncated { offset: usize, needed: usize },

    #[error("count mismatch at byte {offset}: {images} images vs {labels} labels")]
    CountMismatch {
        offset: usize,
        images: usize,
        labels: usize,
    },

    #[error("invalid header value at byte {offset}: {reason}")]
    Header { offset: usize, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures caused by NaN/Inf, including those wrapped by a client.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical { .. } => true,
            Error::Client { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
