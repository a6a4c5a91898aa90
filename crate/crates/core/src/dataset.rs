//! Clustered feature tables: CSV ingestion, summary statistics, z-score
//! normalization and binary label encoding.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

/// Label that marks the positive class when no other set is configured.
pub const DEFAULT_POSITIVE_CLASS: &str = "Candidate";

/// A feature matrix with named columns, the raw label strings and, once
/// encoded, the binary target.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    feature_names: Vec<String>,
    raw_labels: Vec<String>,
    target: Option<Array1<u8>>,
}

impl Dataset {
    /// Builds a dataset, enforcing unique names, matching shapes and finite values.
    pub fn new(
        features: Array2<f64>,
        feature_names: Vec<String>,
        raw_labels: Vec<String>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if feature_names.len() != d {
            return Err(Error::invalid(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                d
            )));
        }
        if raw_labels.len() != n {
            return Err(Error::invalid(format!(
                "{} labels for {} rows",
                raw_labels.len(),
                n
            )));
        }
        check_unique(&feature_names)?;
        for ((i, j), v) in features.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFiniteCell {
                    row: i + 1,
                    column: feature_names[j].clone(),
                });
            }
        }
        Ok(Self {
            features: features.as_standard_layout().to_owned(),
            feature_names,
            raw_labels,
            target: None,
        })
    }

    /// Builds an already-encoded dataset; raw labels are rendered as "1"/"0".
    pub fn from_target(
        features: Array2<f64>,
        feature_names: Vec<String>,
        target: Array1<u8>,
    ) -> Result<Self> {
        let labels = target.iter().map(|t| t.to_string()).collect();
        Self::new(features, feature_names, labels)?.with_target(target)
    }

    /// Attaches an encoded target after validating it.
    pub fn with_target(mut self, target: Array1<u8>) -> Result<Self> {
        if target.len() != self.n_rows() {
            return Err(Error::invalid(format!(
                "target length {} for {} rows",
                target.len(),
                self.n_rows()
            )));
        }
        if target.iter().any(|&t| t > 1) {
            return Err(Error::invalid("target values must be 0 or 1"));
        }
        self.target = Some(target);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn raw_labels(&self) -> &[String] {
        &self.raw_labels
    }

    pub fn target(&self) -> Option<&Array1<u8>> {
        self.target.as_ref()
    }

    /// The encoded target, or [`Error::MissingTarget`].
    pub fn require_target(&self) -> Result<&Array1<u8>> {
        self.target.as_ref().ok_or(Error::MissingTarget)
    }

    /// (negatives, positives) counts of the encoded target.
    pub fn class_counts(&self) -> Result<(usize, usize)> {
        let t = self.require_target()?;
        let pos = t.iter().filter(|&&v| v == 1).count();
        Ok((t.len() - pos, pos))
    }

    /// Sub-dataset with the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: util::take_rows(&self.features, indices),
            feature_names: self.feature_names.clone(),
            raw_labels: indices.iter().map(|&i| self.raw_labels[i].clone()).collect(),
            target: self.target.as_ref().map(|t| util::take_labels(t, indices)),
        }
    }

    /// Sub-dataset with the given feature columns, in the given order.
    pub fn select_features(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: util::take_columns(&self.features, indices),
            feature_names: indices.iter().map(|&j| self.feature_names[j].clone()).collect(),
            raw_labels: self.raw_labels.clone(),
            target: self.target.clone(),
        }
    }

    /// Replaces the feature matrix, keeping names and labels.
    pub(crate) fn with_features(&self, features: Array2<f64>) -> Dataset {
        debug_assert_eq!(features.dim(), self.features.dim());
        Dataset {
            features,
            feature_names: self.feature_names.clone(),
            raw_labels: self.raw_labels.clone(),
            target: self.target.clone(),
        }
    }
}

fn check_unique(names: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(names.len());
    for name in names {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateFeatureName(name.clone()));
        }
    }
    Ok(())
}

/// Reads a header-driven CSV. Every column except `label_column` must be numeric.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, label_column)
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(reader: R, label_column: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?;
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&j| j != label_idx).collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&j| header[j].clone()).collect();
    check_unique(&feature_names)?;

    let d = feature_cols.len();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        for (k, &j) in feature_cols.iter().enumerate() {
            let cell = record[j].trim();
            let v: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                row,
                column: feature_names[k].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteCell {
                    row,
                    column: feature_names[k].clone(),
                });
            }
            values.push(v);
        }
        labels.push(record[label_idx].to_string());
    }
    let n = labels.len();
    let features = Array2::from_shape_vec((n, d), values)
        .map_err(|e| Error::invalid(format!("shape error: {e}")))?;
    Dataset::new(features, feature_names, labels)
}

/// Writes features then the label column. Floats use the shortest
/// representation that parses back to the identical bit pattern.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<&str> = dataset.feature_names.iter().map(String::as_str).collect();
    header.push(label_column);
    w.write_record(&header)?;
    for (i, row) in dataset.features.outer_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        rec.push(dataset.raw_labels[i].clone());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Maps raw labels to the binary target: 1 for labels in `positive_classes`.
pub fn encode_labels(dataset: &Dataset, positive_classes: &BTreeSet<String>) -> Result<Dataset> {
    if positive_classes.is_empty() {
        return Err(Error::invalid("positive class set is empty"));
    }
    let target: Array1<u8> = dataset
        .raw_labels
        .iter()
        .map(|l| u8::from(positive_classes.contains(l)))
        .collect();
    dataset.clone().with_target(target)
}

/// The default positive set `{"Candidate"}`.
pub fn default_positive_classes() -> BTreeSet<String> {
    BTreeSet::from([DEFAULT_POSITIVE_CLASS.to_string()])
}

/// Per-feature descriptive statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStatistics {
    pub count: usize,
    pub feature_names: Vec<String>,
    pub features: Vec<FeatureSummary>,
}

impl SummaryStatistics {
    /// One line per feature: name, mean, std, min, 25%, 50%, 75%, max.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,mean,std,min,25%,50%,75%,max\n");
        for (name, s) in self.feature_names.iter().zip(&self.features) {
            let _ = writeln!(
                out,
                "{name},{},{},{},{},{},{},{}",
                s.mean, s.std, s.min, s.p25, s.p50, s.p75, s.max
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let width = self
            .feature_names
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(7)
            .max(7);
        let mut out = format!(
            "{:<width$} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}\n",
            "feature", "mean", "std", "min", "25%", "50%", "75%", "max"
        );
        for (name, s) in self.feature_names.iter().zip(&self.features) {
            let _ = writeln!(
                out,
                "{name:<width$} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>12.4}",
                s.mean, s.std, s.min, s.p25, s.p50, s.p75, s.max
            );
        }
        let _ = writeln!(out, "count: {}", self.count);
        out
    }
}

/// Linear-interpolation percentile of an ascending-sorted slice, `q` in [0, 1].
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Summary statistics per feature. The std is the population std, matching
/// the normalizer.
pub fn summarize(dataset: &Dataset) -> Result<SummaryStatistics> {
    if dataset.n_rows() == 0 {
        return Err(Error::InsufficientData("summary of an empty dataset".into()));
    }
    let features = dataset
        .features
        .columns()
        .into_iter()
        .map(|col| {
            let mut v: Vec<f64> = col.to_vec();
            let mean = util::mean(&v);
            let std = util::std_population(&v);
            v.sort_by(f64::total_cmp);
            FeatureSummary {
                mean,
                std,
                min: v[0],
                p25: percentile_sorted(&v, 0.25),
                p50: percentile_sorted(&v, 0.5),
                p75: percentile_sorted(&v, 0.75),
                max: v[v.len() - 1],
            }
        })
        .collect();
    Ok(SummaryStatistics {
        count: dataset.n_rows(),
        feature_names: dataset.feature_names.clone(),
        features,
    })
}

/// Fitted z-score parameters, bound to the feature names they were fit on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormalizationParams {
    /// Normalizes one raw row given in this parameter set's feature order.
    pub fn apply_row(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.mean.len() {
            return Err(Error::Dimension {
                expected: self.mean.len(),
                found: raw.len(),
            });
        }
        Ok(raw
            .iter()
            .enumerate()
            .map(|(j, &v)| self.scale(j, v))
            .collect())
    }

    #[inline]
    fn scale(&self, j: usize, v: f64) -> f64 {
        // constant columns carry no information; map them to zero
        if self.std[j] == 0.0 {
            0.0
        } else {
            (v - self.mean[j]) / self.std[j]
        }
    }

    /// Restricts the parameters to a subset of features, in the given order.
    pub fn select(&self, indices: &[usize]) -> NormalizationParams {
        NormalizationParams {
            feature_names: indices.iter().map(|&j| self.feature_names[j].clone()).collect(),
            mean: indices.iter().map(|&j| self.mean[j]).collect(),
            std: indices.iter().map(|&j| self.std[j]).collect(),
        }
    }
}

/// Fits per-column mean and population standard deviation.
pub fn fit_normalizer(dataset: &Dataset) -> Result<NormalizationParams> {
    if dataset.n_rows() < 2 {
        return Err(Error::InsufficientData(format!(
            "normalizer needs at least 2 rows, got {}",
            dataset.n_rows()
        )));
    }
    let (mean, std) = dataset
        .features
        .columns()
        .into_iter()
        .map(|col| {
            let v = col.to_vec();
            (util::mean(&v), util::std_population(&v))
        })
        .unzip();
    Ok(NormalizationParams {
        feature_names: dataset.feature_names.clone(),
        mean,
        std,
    })
}

/// Applies z-score normalization; zero-std columns become all zeros.
pub fn apply_normalizer(params: &NormalizationParams, dataset: &Dataset) -> Result<Dataset> {
    if params.feature_names != dataset.feature_names {
        return Err(Error::FeatureMismatch {
            expected: params.feature_names.clone(),
            found: dataset.feature_names.clone(),
        });
    }
    let mut x = dataset.features.clone();
    for mut row in x.outer_iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = params.scale(j, *v);
        }
    }
    Ok(dataset.with_features(x))
}
