use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),

    #[error("duplicate feature name `{0}`")]
    DuplicateFeatureName(String),

    #[error("non-numeric cell at row {row}, column `{column}`: {value:?}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("non-finite cell at row {row}, column `{column}`")]
    NonFiniteCell { row: usize, column: String },

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("feature names do not match: expected {expected:?}, found {found:?}")]
    FeatureMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("expected a {expected}-dimensional input, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("dataset has no encoded target")]
    MissingTarget,

    #[error("dataset contains a single class")]
    SingleClass,

    #[error("a class is absent from the evaluated samples")]
    AbsentClass,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not enough samples: {0}")]
    InsufficientData(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("every evaluated configuration failed")]
    AllFailed,

    #[error("invalid prediction input: missing {missing:?}, unknown {unknown:?}, non-finite {non_finite:?}")]
    PredictionInput {
        missing: Vec<String>,
        unknown: Vec<String>,
        non_finite: Vec<String>,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
