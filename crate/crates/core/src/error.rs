use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site index {index} out of range (n = {n})")]
    Index { index: usize, n: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("cannot evaluate an open set of size {0}: every site needs two distinct parents")]
    InfeasibleEvaluation(usize),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
