use std::path::PathBuf;

/// Errors raised by the estimators, evaluation routines and data loaders.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}: column `{column}` holds non-numeric value `{value}`")]
    NonNumericValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: negative observed time {value}")]
    NegativeTime { row: usize, value: f64 },
    #[error("row {row}: event indicator must be 0 or 1, got `{value}`")]
    EventNotBinary { row: usize, value: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("subject subset is empty")]
    EmptySubset,
    #[error("all weights are zero")]
    AllWeightsZero,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid interval [0, {0}]")]
    InvalidInterval(f64),
    #[error("k = {k} exceeds the number of training subjects {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("no training subject has positive weight at the query point")]
    NoNeighbors,
    #[error("every neighbor's estimated tail probability hit the floor")]
    DegenerateTail,
    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("index {index} out of range for {len} subjects")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("no comparable pairs in the test set")]
    NoComparablePairs,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot tune: {0}")]
    UnTunable(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Whether the error stems from the input data rather than configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::MissingColumn(_)
                | Error::NonNumericValue { .. }
                | Error::NegativeTime { .. }
                | Error::EventNotBinary { .. }
                | Error::EmptyDataset
                | Error::DimensionMismatch { .. }
                | Error::TooFewRecords { .. }
                | Error::Io { .. }
                | Error::Csv(_)
        )
    }
}
