//! Experiment configuration: a TOML document with the dataset, stage
//! toggles, resampler roster, model grids, CV plan, comparison protocol,
//! seed and output directory. `default` names the built-in protocol.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use imbapipe_core::classifiers::{Family, ModelParams};
use imbapipe_core::evaluation::CvPlan;
use imbapipe_core::resampling::{ResamplerKind, ResamplerSpec};
use imbapipe_core::statcompare::{q_alpha, CdFormula};
use imbapipe_core::util::derive_seed;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed; every stochastic component derives its seed from it.
    pub seed: u64,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub stages: StageToggles,
    #[serde(default)]
    pub cv: CvConfig,
    #[serde(default)]
    pub resampling: ResamplingConfig,
    #[serde(default)]
    pub models: ModelsConfig,
    #[serde(default)]
    pub feature_selection: FeatureSelectionConfig,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default)]
    pub importance: ImportanceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub label_column: String,
    pub positive_classes: Vec<String>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("degotalls-like.csv"),
            label_column: "label".into(),
            positive_classes: vec!["Candidate".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Stages executed by `run`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageToggles {
    pub resample_bench: bool,
    pub model_select: bool,
    pub feature_select: bool,
    pub compare: bool,
    pub importance: bool,
    pub ablation: bool,
    pub train: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        Self {
            resample_bench: true,
            model_select: true,
            feature_select: true,
            compare: true,
            importance: true,
            ablation: false,
            train: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
    pub stratified: bool,
    /// Refit the normalizer inside every training fold.
    pub per_fold_normalization: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            stratified: true,
            per_fold_normalization: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResamplingConfig {
    /// Resampler kinds by config name (e.g. `SMOTE_IPF`).
    pub roster: Vec<String>,
    /// Resamplers carried into model selection.
    pub top: usize,
    /// Parameters shared by every resampler; `kind` and `seed` are ignored.
    pub params: ResamplerSpec,
}

impl Default for ResamplingConfig {
    fn default() -> Self {
        Self {
            roster: ResamplerKind::ALL.iter().map(|k| k.config_name().to_string()).collect(),
            top: 3,
            params: ResamplerSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    /// Family short names (e.g. `XGB`, `KNN`).
    pub families: Vec<String>,
    /// Replacement grid points; any family with an entry here uses only
    /// its entries instead of the built-in grid.
    pub grid: Vec<ModelParams>,
    /// Replacement default points used by the resampler benchmark and the
    /// ablation baseline.
    pub defaults: Vec<ModelParams>,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        Self {
            families: Family::ALL.iter().map(|f| f.short_name().to_string()).collect(),
            grid: Vec::new(),
            defaults: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSelectionConfig {
    /// Smallest k in the sweep; the sweep ends at the feature count.
    pub k_min: usize,
    /// Number of model-selection pipelines carried forward (all when absent).
    pub top: Option<usize>,
}

impl Default for FeatureSelectionConfig {
    fn default() -> Self {
        Self { k_min: 5, top: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankUnit {
    /// One rank row per repetition (mean over folds).
    Run,
    /// One rank row per (repetition, fold).
    Fold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub runs: usize,
    pub alpha: f64,
    pub formula: CdFormula,
    pub rank_unit: RankUnit,
    /// Number of feature-selection pipelines compared (all when absent).
    pub top: Option<usize>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            runs: 10,
            alpha: 0.05,
            formula: CdFormula::Paper,
            rank_unit: RankUnit::Run,
            top: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceConfig {
    pub permutations: usize,
    pub groups: usize,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        Self {
            permutations: 100,
            groups: 3,
        }
    }
}

// stream tags for derive_seed
const TAG_CV: u64 = 1;
const TAG_RESAMPLER: u64 = 2;
const TAG_MODEL: u64 = 3;
const TAG_IMPORTANCE: u64 = 4;
const TAG_REPETITION: u64 = 5;

impl ExperimentConfig {
    /// The built-in protocol with the given seed.
    pub fn default_with_seed(seed: u64) -> Self {
        Self {
            seed,
            dataset: DatasetConfig::default(),
            output: OutputConfig::default(),
            stages: StageToggles::default(),
            cv: CvConfig::default(),
            resampling: ResamplingConfig::default(),
            models: ModelsConfig::default(),
            feature_selection: FeatureSelectionConfig::default(),
            compare: CompareConfig::default(),
            importance: ImportanceConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, or the built-in protocol (seed 0) when `path` is `default`.
    /// Relative dataset and output paths resolve against the config's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        if path.as_os_str() == "default" {
            return Ok(Self::default_with_seed(0));
        }
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            for p in [&mut cfg.dataset.path, &mut cfg.output.dir] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dataset.label_column.is_empty() {
            return Err(invalid("dataset.label_column is empty"));
        }
        if self.dataset.positive_classes.is_empty() {
            return Err(invalid("dataset.positive_classes is empty"));
        }
        if self.cv.folds < 2 {
            return Err(invalid(format!("cv.folds = {} (need >= 2)", self.cv.folds)));
        }
        let roster = self.roster()?;
        if roster.is_empty() {
            return Err(invalid("resampling.roster is empty"));
        }
        if self.resampling.top == 0 {
            return Err(invalid("resampling.top must be >= 1"));
        }
        self.resampling
            .params
            .validate()
            .map_err(|e| invalid(format!("resampling.params: {e}")))?;
        let families = self.families()?;
        if families.is_empty() {
            return Err(invalid("models.families is empty"));
        }
        for p in self.models.grid.iter().chain(&self.models.defaults) {
            if !families.contains(&p.family()) {
                return Err(invalid(format!(
                    "models entry for {} but the family is not in models.families",
                    p.family().short_name()
                )));
            }
        }
        if self.feature_selection.k_min == 0 {
            return Err(invalid("feature_selection.k_min must be >= 1"));
        }
        if matches!(self.feature_selection.top, Some(0)) || matches!(self.compare.top, Some(0)) {
            return Err(invalid("top limits must be >= 1"));
        }
        if self.compare.runs < 2 {
            return Err(invalid("compare.runs must be >= 2"));
        }
        q_alpha(2, self.compare.alpha).map_err(|e| invalid(format!("compare.alpha: {e}")))?;
        if self.importance.permutations == 0 {
            return Err(invalid("importance.permutations must be >= 1"));
        }
        if !(1..=3).contains(&self.importance.groups) {
            return Err(invalid("importance.groups must be 1, 2 or 3"));
        }
        Ok(())
    }

    pub fn roster(&self) -> Result<Vec<ResamplerKind>, ConfigError> {
        let mut seen = BTreeSet::new();
        self.resampling
            .roster
            .iter()
            .map(|name| {
                let kind = ResamplerKind::parse(name).ok_or_else(|| invalid(format!("unknown resampler `{name}`")))?;
                if !seen.insert(kind) {
                    return Err(invalid(format!("resampler `{name}` listed twice")));
                }
                Ok(kind)
            })
            .collect()
    }

    pub fn families(&self) -> Result<Vec<Family>, ConfigError> {
        let mut seen = BTreeSet::new();
        self.models
            .families
            .iter()
            .map(|name| {
                let f = Family::parse(name).ok_or_else(|| invalid(format!("unknown model family `{name}`")))?;
                if !seen.insert(f) {
                    return Err(invalid(format!("model family `{name}` listed twice")));
                }
                Ok(f)
            })
            .collect()
    }

    pub fn default_params(&self, family: Family) -> ModelParams {
        self.models
            .defaults
            .iter()
            .find(|p| p.family() == family)
            .copied()
            .unwrap_or_else(|| family.default_params())
    }

    pub fn grid(&self, family: Family) -> Vec<ModelParams> {
        let custom: Vec<ModelParams> = self.models.grid.iter().filter(|p| p.family() == family).copied().collect();
        if custom.is_empty() {
            family.grid()
        } else {
            custom
        }
    }

    pub fn cv_plan(&self) -> CvPlan {
        self.cv_plan_for_run(None)
    }

    /// Fold plan of comparison repetition `run` (`None` is the shared plan).
    pub fn cv_plan_for_run(&self, run: Option<usize>) -> CvPlan {
        let base = derive_seed(self.seed, TAG_CV);
        CvPlan {
            folds: self.cv.folds,
            stratified: self.cv.stratified,
            seed: match run {
                None => base,
                Some(r) => derive_seed(derive_seed(self.seed, TAG_REPETITION), r as u64),
            },
        }
    }

    pub fn resampler(&self, kind: ResamplerKind) -> ResamplerSpec {
        ResamplerSpec {
            kind,
            seed: derive_seed(self.seed, TAG_RESAMPLER),
            ..self.resampling.params
        }
    }

    pub fn model_seed(&self) -> u64 {
        derive_seed(self.seed, TAG_MODEL)
    }

    pub fn importance_seed(&self) -> u64 {
        derive_seed(self.seed, TAG_IMPORTANCE)
    }

    pub fn positive_classes(&self) -> BTreeSet<String> {
        self.dataset.positive_classes.iter().cloned().collect()
    }

    /// SHA-256 over the canonical JSON form, hex, first 16 characters.
    /// The output directory does not take part.
    pub fn content_hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))[..16].to_string()
    }
}
