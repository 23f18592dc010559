use std::path::PathBuf;

use mgtbench_core::bench::BenchError;
use mgtbench_core::corpus::CorpusError;
use mgtbench_core::scorer::ScorerError;

use crate::ingest::LineError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Data and contract failures. The CLI maps all of them to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {} invalid record(s); first: {}", .errors.len(), .errors[0])]
    Ingest { path: PathBuf, errors: Vec<LineError> },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid backend spec {spec:?}: {reason}")]
    BackendSpec { spec: String, reason: String },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Bench(#[from] BenchError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
