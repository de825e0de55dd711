use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Model,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("post {post_id}: {message}")]
    InvalidPost { post_id: String, message: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("sequence of {needed} tokens does not fit a context of {context}")]
    ContextOverflow { needed: usize, context: usize },
    #[error("empty training set: {0}")]
    EmptyTrainingSet(String),
    #[error("degenerate statistic: {0}")]
    Degenerate(String),
    #[error("model: {0}")]
    Model(String),
    #[error(transparent)]
    Tensor(#[from] candle_core::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::InvalidPost { .. }
            | Error::InvalidInput(_)
            | Error::EmptyTrainingSet(_)
            | Error::Degenerate(_)
            | Error::Json(_) => ErrorKind::Data,
            Error::ContextOverflow { .. } | Error::Model(_) | Error::Tensor(_) => ErrorKind::Model,
        }
    }
}
