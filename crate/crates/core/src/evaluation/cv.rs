//! Leakage-safe cross validation of (resampler, model, feature subset)
//! pipelines, plus the grid searches built on it.

use std::borrow::Cow;
use std::sync::OnceLock;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mi::{feature_scores, FeatureSelection};
use super::{balanced_accuracy, confusion, stratified_kfold, CvPlan, Fold};
use crate::classifiers::{train_model, ModelParams, ModelSpec, TrainedModel};
use crate::dataset::{apply_normalizer, fit_normalizer, Dataset};
use crate::error::{Error, Result};
use crate::resampling::{resample, ResamplerKind, ResamplerSpec};
use crate::util::{self, derive_seed};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubset {
    All,
    /// Fixed column indices.
    Columns(Vec<usize>),
    /// The k best columns by mutual information on each training fold.
    KBest(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub resampler: ResamplerSpec,
    pub model: ModelSpec,
    pub features: FeatureSubset,
}

impl Pipeline {
    pub fn new(resampler: ResamplerSpec, model: ModelSpec, features: FeatureSubset) -> Self {
        Self {
            resampler,
            model,
            features,
        }
    }

    /// Report label such as `XGB-SMOTE_IPF`.
    pub fn method_name(&self) -> String {
        format!("{}-{}", self.model.family().short_name(), self.resampler.kind.config_name())
    }

    /// Number of model inputs given `d` available features.
    pub fn feature_count(&self, d: usize) -> usize {
        match &self.features {
            FeatureSubset::All => d,
            FeatureSubset::Columns(c) => c.len(),
            FeatureSubset::KBest(k) => *k,
        }
    }

    /// Identifier such as `XGB-SMOTE_IPF/35`.
    pub fn id(&self, d: usize) -> String {
        format!("{}/{}", self.method_name(), self.feature_count(d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvOptions {
    /// Refit the normalizer on each training fold instead of trusting a
    /// globally normalized input.
    pub per_fold_normalization: bool,
    /// Resample the full dataset once, then split (leaks synthetic
    /// neighbors of test rows into training; kept for comparison only).
    pub resample_before_split: bool,
}

/// Fold scores and their aggregates. `error_pct` is 100 × the population
/// standard deviation of the successful fold scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineScore {
    pub fold_scores: Vec<f64>,
    pub failed_folds: Vec<usize>,
    pub mean: f64,
    pub error_pct: f64,
    /// 100 × standard error of the mean.
    pub std_error_pct: f64,
    /// 100 × coefficient of variation.
    pub cv_pct: f64,
    pub warnings: Vec<String>,
}

impl PipelineScore {
    pub fn from_fold_results(results: Vec<Result<f64>>) -> Result<Self> {
        let mut scores = Vec::new();
        let mut failed = Vec::new();
        let mut warnings = Vec::new();
        for (f, r) in results.into_iter().enumerate() {
            match r {
                Ok(s) => scores.push(s),
                Err(e) => {
                    warnings.push(format!("fold {f} failed: {e}"));
                    failed.push(f);
                }
            }
        }
        if scores.is_empty() {
            return Err(Error::AllFailed);
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(Self::from_scores(scores, failed, warnings))
    }

    pub fn from_scores(scores: Vec<f64>, failed_folds: Vec<usize>, warnings: Vec<String>) -> Self {
        let mean = util::mean(&scores);
        let std = util::std_population(&scores);
        Self {
            mean,
            error_pct: 100.0 * std,
            std_error_pct: 100.0 * std / (scores.len() as f64).sqrt(),
            cv_pct: if mean > 0.0 { 100.0 * std / mean } else { 0.0 },
            fold_scores: scores,
            failed_folds,
            warnings,
        }
    }

    /// Higher mean wins; equal means go to the lower error.
    pub fn beats(&self, other: &PipelineScore) -> bool {
        self.mean > other.mean || (self.mean == other.mean && self.error_pct < other.error_pct)
    }
}

/// Everything one fold produced: the columns and model trained on the
/// training fold, and the prepared test fold.
#[derive(Debug, Clone)]
pub struct FoldArtifacts {
    pub fold: usize,
    pub columns: Vec<usize>,
    pub model: TrainedModel,
    pub resampled_rows: usize,
    pub test_rows: Vec<usize>,
    pub test_x: Array2<f64>,
    pub test_y: Vec<u8>,
}

impl FoldArtifacts {
    pub fn score(&self) -> Result<f64> {
        let pred = self.model.predict_batch(&self.test_x)?;
        balanced_accuracy(&confusion(&self.test_y, &pred)?)
    }
}

type CachedScores = std::result::Result<Vec<f64>, String>;

/// Fixed folds over one dataset, with per-fold caches shared by every
/// pipeline evaluated against them.
pub struct CvContext<'a> {
    data: &'a Dataset,
    plan: CvPlan,
    options: CvOptions,
    folds: Vec<Fold>,
    split: Vec<OnceLock<(Dataset, Dataset)>>,
    mi: Vec<OnceLock<CachedScores>>,
}

impl<'a> CvContext<'a> {
    pub fn new(data: &'a Dataset, plan: CvPlan, options: CvOptions) -> Result<Self> {
        let y = data.require_target()?;
        let folds = stratified_kfold(y.as_slice().expect("contiguous target"), &plan)?;
        let k = folds.len();
        Ok(Self {
            data,
            plan,
            options,
            folds,
            split: (0..k).map(|_| OnceLock::new()).collect(),
            mi: (0..k).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn plan(&self) -> &CvPlan {
        &self.plan
    }

    pub fn folds(&self) -> &[Fold] {
        &self.folds
    }

    /// (training fold, test fold), normalized per fold when requested.
    pub fn fold_split(&self, f: usize) -> Result<&(Dataset, Dataset)> {
        if let Some(s) = self.split[f].get() {
            return Ok(s);
        }
        let (train_idx, test_idx) = &self.folds[f];
        let mut train = self.data.select_rows(train_idx);
        let mut test = self.data.select_rows(test_idx);
        if self.options.per_fold_normalization {
            let params = fit_normalizer(&train)?;
            train = apply_normalizer(&params, &train)?;
            test = apply_normalizer(&params, &test)?;
        }
        Ok(self.split[f].get_or_init(|| (train, test)))
    }

    /// Mutual-information scores computed on training fold `f` only.
    pub fn fold_scores(&self, f: usize) -> Result<&[f64]> {
        let cached = match self.mi[f].get() {
            Some(c) => c,
            None => {
                let computed = feature_scores(&self.fold_split(f)?.0).map_err(|e| e.to_string());
                self.mi[f].get_or_init(|| computed)
            }
        };
        cached.as_deref().map_err(|e| Error::Training(e.clone()))
    }

    /// Model-input columns (ascending) for `features` on fold `f`.
    pub fn fold_columns(&self, features: &FeatureSubset, f: usize) -> Result<Vec<usize>> {
        let d = self.data.n_features();
        match features {
            FeatureSubset::All => Ok((0..d).collect()),
            FeatureSubset::Columns(c) => {
                if c.is_empty() || c.iter().any(|&j| j >= d) {
                    return Err(Error::invalid(format!("feature columns {c:?} out of range for {d} features")));
                }
                let mut c = c.clone();
                c.sort_unstable();
                c.dedup();
                Ok(c)
            }
            // selecting every feature needs no scoring
            FeatureSubset::KBest(k) if *k == d => Ok((0..d).collect()),
            FeatureSubset::KBest(k) => Ok(FeatureSelection::from_scores(self.fold_scores(f)?.to_vec(), *k)?.columns()),
        }
    }

    /// Select, resample and train on training fold `f`.
    pub fn fit_fold(&self, pipeline: &Pipeline, f: usize) -> Result<FoldArtifacts> {
        let (train, test) = self.fold_split(f)?;
        let columns = self.fold_columns(&pipeline.features, f)?;
        let all = columns.len() == self.data.n_features();
        let (train, test_x) = if all {
            (Cow::Borrowed(train), test.features().clone())
        } else {
            (
                Cow::Owned(train.select_features(&columns)),
                util::take_columns(test.features(), &columns),
            )
        };
        let spec = ResamplerSpec {
            seed: derive_seed(pipeline.resampler.seed, f as u64),
            ..pipeline.resampler
        };
        let balanced = resample(&train, &spec)?;
        let y = balanced.data.require_target()?.to_vec();
        let model_spec = ModelSpec {
            seed: derive_seed(pipeline.model.seed, f as u64),
            ..pipeline.model
        };
        let model = train_model(&model_spec, balanced.data.features(), &y)?;
        Ok(FoldArtifacts {
            fold: f,
            columns,
            model,
            resampled_rows: balanced.data.n_rows(),
            test_rows: self.folds[f].1.clone(),
            test_x,
            test_y: test.require_target()?.to_vec(),
        })
    }

    pub fn evaluate(&self, pipeline: &Pipeline) -> Result<PipelineScore> {
        if self.options.resample_before_split && pipeline.resampler.kind != ResamplerKind::None {
            let balanced = resample(self.data, &pipeline.resampler)?;
            let inner = CvContext::new(
                &balanced.data,
                self.plan,
                CvOptions {
                    resample_before_split: false,
                    ..self.options
                },
            )?;
            let mut p = pipeline.clone();
            p.resampler.kind = ResamplerKind::None;
            return inner.evaluate(&p);
        }
        let results: Vec<Result<f64>> = (0..self.folds.len())
            .into_par_iter()
            .map(|f| self.fit_fold(pipeline, f)?.score())
            .collect();
        PipelineScore::from_fold_results(results)
    }
}

/// Cross-validates one pipeline with default options.
pub fn cross_validate(pipeline: &Pipeline, data: &Dataset, plan: &CvPlan) -> Result<PipelineScore> {
    CvContext::new(data, *plan, CvOptions::default())?.evaluate(pipeline)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub best_index: usize,
    pub best: Pipeline,
    pub score: PipelineScore,
    /// Every grid point in grid order; `None` when all its folds failed.
    pub evaluated: Vec<(ModelParams, Option<PipelineScore>)>,
}

/// Cross-validates every grid point under one resampler and feature subset.
/// Best = highest mean, then lowest error, then earliest grid position.
pub fn grid_search(
    grid: &[ModelParams],
    resampler: &ResamplerSpec,
    features: &FeatureSubset,
    model_seed: u64,
    ctx: &CvContext<'_>,
) -> Result<GridOutcome> {
    if grid.is_empty() {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    let pipelines: Vec<Pipeline> = grid
        .iter()
        .map(|p| Pipeline::new(*resampler, ModelSpec::new(*p, model_seed), features.clone()))
        .collect();
    let scores: Vec<Option<PipelineScore>> = pipelines
        .par_iter()
        .map(|p| match ctx.evaluate(p) {
            Ok(s) => Some(s),
            Err(e) => {
                log::warn!("{} ({}) failed: {e}", p.method_name(), p.model.params.describe());
                None
            }
        })
        .collect();
    let best_index = pick_best(&scores).ok_or(Error::AllFailed)?;
    Ok(GridOutcome {
        best_index,
        best: pipelines[best_index].clone(),
        score: scores[best_index].clone().expect("best exists"),
        evaluated: grid.iter().copied().zip(scores).collect(),
    })
}

/// Index of the best score; earlier entries win exact ties.
fn pick_best(scores: &[Option<PipelineScore>]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        let Some(s) = s else { continue };
        if best.is_none_or(|b| s.beats(scores[b].as_ref().expect("scored"))) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSearch {
    /// The input pipeline with `features = KBest(best_k)`.
    pub pipeline: Pipeline,
    pub best_k: usize,
    pub score: PipelineScore,
    /// (k, score) for k = k_min..=d.
    pub sweep: Vec<(usize, Option<PipelineScore>)>,
}

/// For each pipeline, sweeps k from `k_min` to d and keeps the best k
/// (highest mean, then lowest error, then smallest k).
pub fn feature_grid_search(pipelines: &[Pipeline], ctx: &CvContext<'_>, k_min: usize) -> Result<Vec<FeatureSearch>> {
    let d = ctx.data().n_features();
    if k_min == 0 || k_min > d {
        return Err(Error::invalid(format!("k_min={k_min} outside 1..={d}")));
    }
    let ks: Vec<usize> = (k_min..=d).collect();
    let jobs: Vec<(usize, usize)> = (0..pipelines.len()).flat_map(|p| ks.iter().map(move |&k| (p, k))).collect();
    let scores: Vec<Option<PipelineScore>> = jobs
        .par_iter()
        .map(|&(p, k)| {
            let mut pipeline = pipelines[p].clone();
            pipeline.features = FeatureSubset::KBest(k);
            ctx.evaluate(&pipeline)
                .map_err(|e| log::warn!("{} with k={k} failed: {e}", pipeline.method_name()))
                .ok()
        })
        .collect();
    pipelines
        .iter()
        .enumerate()
        .map(|(p, pipeline)| {
            let row = &scores[p * ks.len()..(p + 1) * ks.len()];
            let best = pick_best(row).ok_or(Error::AllFailed)?;
            let mut chosen = pipeline.clone();
            chosen.features = FeatureSubset::KBest(ks[best]);
            Ok(FeatureSearch {
                pipeline: chosen,
                best_k: ks[best],
                score: row[best].clone().expect("best exists"),
                sweep: ks.iter().copied().zip(row.iter().cloned()).collect(),
            })
        })
        .collect()
}
