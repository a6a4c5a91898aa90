//! Deployable model bundle: the normalizer, the selected feature names and
//! the trained model of one pipeline fitted on a full dataset.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifiers::{train_model, TrainedModel};
use crate::dataset::{apply_normalizer, fit_normalizer, Dataset, NormalizationParams, DEFAULT_POSITIVE_CLASS};
use crate::error::{Error, Result};
use crate::evaluation::{select_k_best, FeatureSubset, Pipeline};
use crate::resampling::resample;

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
pub const NEGATIVE_LABEL: &str = "Not candidate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    /// Pipeline id such as `XGB-SMOTE_IPF/35`.
    pub pipeline_id: String,
    pub pipeline: Pipeline,
    /// Model inputs in the order the model consumes them.
    pub feature_names: Vec<String>,
    /// Selected features ranked by mutual information, best first.
    /// Equals `feature_names` when no selection was applied.
    pub selection_rank: Vec<String>,
    /// Normalizer restricted to `feature_names`, same order.
    pub normalizer: NormalizationParams,
    pub model: TrainedModel,
    pub positive_label: String,
    pub negative_label: String,
    pub training_rows: usize,
    pub created_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub score: f64,
    pub pipeline: String,
}

impl ModelBundle {
    /// Normalizes, selects, resamples and trains `pipeline` on all of `data`
    /// (raw feature values with an encoded target).
    pub fn train(data: &Dataset, pipeline: &Pipeline, created_unix: u64) -> Result<ModelBundle> {
        let d = data.n_features();
        let params = fit_normalizer(data)?;
        let normalized = apply_normalizer(&params, data)?;
        let (columns, rank) = match &pipeline.features {
            FeatureSubset::All => ((0..d).collect::<Vec<_>>(), (0..d).collect()),
            FeatureSubset::Columns(c) => {
                if c.is_empty() || c.iter().any(|&j| j >= d) {
                    return Err(Error::invalid(format!("feature columns {c:?} out of range for {d} features")));
                }
                let mut sorted = c.clone();
                sorted.sort_unstable();
                sorted.dedup();
                (sorted.clone(), sorted)
            }
            FeatureSubset::KBest(k) if *k == d => ((0..d).collect(), (0..d).collect()),
            FeatureSubset::KBest(k) => {
                let sel = select_k_best(&normalized, *k)?;
                (sel.columns(), sel.selected.clone())
            }
        };
        let train = if columns.len() == d {
            normalized
        } else {
            normalized.select_features(&columns)
        };
        let balanced = resample(&train, &pipeline.resampler)?;
        let y = balanced.data.require_target()?.to_vec();
        let model = train_model(&pipeline.model, balanced.data.features(), &y)?;
        let names = data.feature_names();
        Ok(ModelBundle {
            format_version: BUNDLE_FORMAT_VERSION,
            pipeline_id: pipeline.id(d),
            pipeline: pipeline.clone(),
            feature_names: columns.iter().map(|&j| names[j].clone()).collect(),
            selection_rank: rank.iter().map(|&j| names[j].clone()).collect(),
            normalizer: params.select(&columns),
            model,
            positive_label: DEFAULT_POSITIVE_CLASS.to_string(),
            negative_label: NEGATIVE_LABEL.to_string(),
            training_rows: data.n_rows(),
            created_unix,
        })
    }

    /// Checks that names, normalizer and model agree on the input dimension.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != BUNDLE_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported bundle format version {} (expected {BUNDLE_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.normalizer.feature_names != self.feature_names {
            return Err(Error::FeatureMismatch {
                expected: self.feature_names.clone(),
                found: self.normalizer.feature_names.clone(),
            });
        }
        let d = self.feature_names.len();
        for found in [self.normalizer.mean.len(), self.normalizer.std.len(), self.model.n_features] {
            if found != d {
                return Err(Error::Dimension { expected: d, found });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<ModelBundle> {
        let b: ModelBundle = serde_json::from_str(s)?;
        b.validate()?;
        Ok(b)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ModelBundle> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Score of one raw row given in `feature_names` order.
    pub fn score_row(&self, raw: &[f64]) -> Result<f64> {
        let x = self.normalizer.apply_row(raw)?;
        let non_finite: Vec<String> = raw
            .iter()
            .zip(&self.feature_names)
            .filter(|(v, _)| !v.is_finite())
            .map(|(_, n)| n.clone())
            .collect();
        if !non_finite.is_empty() {
            return Err(Error::PredictionInput {
                missing: vec![],
                unknown: vec![],
                non_finite,
            });
        }
        self.model.predict_score(&x)
    }

    /// Orders a name-to-value map per `feature_names`; every selected name
    /// must be present with a finite value and no other name may appear.
    pub fn order_features(&self, values: &HashMap<String, f64>) -> Result<Vec<f64>> {
        let missing: Vec<String> = self
            .feature_names
            .iter()
            .filter(|n| !values.contains_key(*n))
            .cloned()
            .collect();
        let mut unknown: Vec<String> = values
            .keys()
            .filter(|k| !self.feature_names.contains(k))
            .cloned()
            .collect();
        unknown.sort();
        let non_finite: Vec<String> = self
            .feature_names
            .iter()
            .filter(|n| values.get(*n).is_some_and(|v| !v.is_finite()))
            .cloned()
            .collect();
        if !missing.is_empty() || !unknown.is_empty() || !non_finite.is_empty() {
            return Err(Error::PredictionInput {
                missing,
                unknown,
                non_finite,
            });
        }
        Ok(self.feature_names.iter().map(|n| values[n]).collect())
    }

    pub fn label_for(&self, score: f64) -> &str {
        if score > 0.5 {
            &self.positive_label
        } else {
            &self.negative_label
        }
    }

    pub fn predict_row(&self, raw: &[f64]) -> Result<Prediction> {
        let score = self.score_row(raw)?;
        Ok(Prediction {
            label: self.label_for(score).to_string(),
            score,
            pipeline: self.pipeline_id.clone(),
        })
    }

    pub fn predict_named(&self, values: &HashMap<String, f64>) -> Result<Prediction> {
        self.predict_row(&self.order_features(values)?)
    }

    /// Column indices of `feature_names` within `names` (e.g. a CSV header).
    pub fn locate_columns(&self, names: &[String]) -> Result<Vec<usize>> {
        let mut missing = Vec::new();
        let idx: Vec<usize> = self
            .feature_names
            .iter()
            .filter_map(|n| {
                let p = names.iter().position(|m| m == n);
                if p.is_none() {
                    missing.push(n.clone());
                }
                p
            })
            .collect();
        if missing.is_empty() {
            Ok(idx)
        } else {
            Err(Error::PredictionInput {
                missing,
                unknown: vec![],
                non_finite: vec![],
            })
        }
    }
}
