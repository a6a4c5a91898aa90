//! Run directory: stage outputs live under `<out>/<run hash>/`, where the
//! hash covers the effective config and the dataset bytes. A manifest
//! records every written file with its SHA-256.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::StageError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// File name to hex SHA-256.
    pub files: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub run_hash: String,
    pub dataset: PathBuf,
    pub dataset_sha256: String,
    pub config: serde_json::Value,
    pub stages: BTreeMap<String, StageRecord>,
}

pub struct RunDir {
    pub root: PathBuf,
    pub run_hash: String,
    dataset_sha256: String,
    config: ExperimentConfig,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunDir {
    /// Creates (or reopens) the run directory for `cfg` over the dataset file.
    pub fn open(cfg: &ExperimentConfig) -> Result<RunDir, StageError> {
        let bytes = std::fs::read(&cfg.dataset.path)
            .map_err(|e| StageError::Data(format!("cannot read dataset {}: {e}", cfg.dataset.path.display())))?;
        let dataset_sha256 = sha256_hex(&bytes);
        let run_hash = sha256_hex(format!("{}:{dataset_sha256}", cfg.content_hash()).as_bytes())[..16].to_string();
        let root = cfg.output.dir.join(&run_hash);
        std::fs::create_dir_all(&root).map_err(|e| StageError::io(&root, e))?;
        // the snapshot points back at the output root relative to itself, so
        // run directories do not depend on where they were written
        let mut config = cfg.clone();
        config.output.dir = PathBuf::from("..");
        let dir = RunDir {
            root,
            run_hash,
            dataset_sha256,
            config,
        };
        dir.write_bytes("config.toml", dir.config.to_toml().as_bytes())?;
        Ok(dir)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).is_file()
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<(), StageError> {
        let p = self.path(name);
        std::fs::write(&p, bytes).map_err(|e| StageError::io(&p, e))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), StageError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| StageError::Runtime(e.to_string()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Reads an earlier stage's artifact; absence is an error naming the
    /// stage that produces it.
    pub fn read_json<T: DeserializeOwned>(&self, name: &str, producer: &str) -> Result<T, StageError> {
        let p = self.path(name);
        if !p.is_file() {
            return Err(StageError::MissingArtifact {
                path: p,
                stage: producer.to_string(),
            });
        }
        let text = std::fs::read_to_string(&p).map_err(|e| StageError::io(&p, e))?;
        serde_json::from_str(&text).map_err(|e| StageError::Runtime(format!("corrupt artifact {}: {e}", p.display())))
    }

    fn manifest(&self) -> Result<Manifest, StageError> {
        let p = self.path(MANIFEST);
        if p.is_file() {
            let text = std::fs::read_to_string(&p).map_err(|e| StageError::io(&p, e))?;
            if let Ok(m) = serde_json::from_str(&text) {
                return Ok(m);
            }
        }
        Ok(Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            run_hash: self.run_hash.clone(),
            dataset: self.config.dataset.path.clone(),
            dataset_sha256: self.dataset_sha256.clone(),
            config: serde_json::to_value(&self.config).map_err(|e| StageError::Runtime(e.to_string()))?,
            stages: BTreeMap::new(),
        })
    }

    /// Records `files` (already written) under `stage` in the manifest.
    pub fn record(&self, stage: &str, files: &[&str], warnings: Vec<String>) -> Result<(), StageError> {
        let mut m = self.manifest()?;
        let mut rec = StageRecord {
            files: BTreeMap::new(),
            warnings,
        };
        for f in files {
            let p = self.path(f);
            let bytes = std::fs::read(&p).map_err(|e| StageError::io(&p, e))?;
            rec.files.insert(f.to_string(), sha256_hex(&bytes));
        }
        m.stages.insert(stage.to_string(), rec);
        self.write_json(MANIFEST, &m)
    }
}

pub fn ensure_parent(path: &Path) -> Result<(), StageError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| StageError::io(dir, e))?;
    }
    Ok(())
}
