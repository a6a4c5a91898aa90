use std::path::{Path, PathBuf};

use crate::config::ConfigError;

/// Failure of a CLI command, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("data error: {0}")]
    Data(String),
    #[error("missing artifact {path}: run the `{stage}` stage first")]
    MissingArtifact { path: PathBuf, stage: String },
    #[error("{0}")]
    Runtime(String),
}

impl StageError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        StageError::Runtime(format!("io error on {}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            StageError::Config(_) => 2,
            StageError::Data(_) => 3,
            StageError::MissingArtifact { .. } | StageError::Runtime(_) => 4,
        }
    }
}

impl From<imbapipe_core::Error> for StageError {
    fn from(e: imbapipe_core::Error) -> Self {
        StageError::Runtime(e.to_string())
    }
}
