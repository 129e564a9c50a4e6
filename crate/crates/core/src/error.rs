use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    UnparseableNumber {
        row: usize,
        column: String,
        value: String,
    },

    #[error("dataset is empty after dropping {dropped} rows with missing values")]
    EmptyDataset { dropped: usize },

    #[error("expected {expected} feature values, got {actual}")]
    ArityMismatch { expected: usize, actual: usize },

    #[error("cannot train on an empty training set")]
    EmptyTrainingSet,

    #[error("dataset too small: {0}")]
    DatasetTooSmall(String),

    #[error("no instance with id {0}")]
    UnknownInstance(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported {kind} format version {found} (expected {expected})")]
    UnsupportedFormatVersion {
        kind: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("schema document: {0}")]
    Toml(#[from] toml::de::Error),
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
