//! Class balancing: k-means undersampling, SMOTE-family oversampling and
//! the two cleaning variants (Tomek links, iterative partition filter).

mod cleaning;
mod oversample;
mod undersample;

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub use cleaning::{smote_ipf, smote_tomek, tomek_links};
pub use oversample::{adasyn_oversample, adasyn_weights, prowsyn_levels, prowsyn_oversample, smote_oversample};
pub use undersample::{cluster_centroids_undersample, cluster_representatives_undersample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ResamplerKind {
    ClusterCentroids,
    ClusterRepresentatives,
    #[serde(rename = "SMOTE")]
    Smote,
    #[serde(rename = "ADASYN")]
    Adasyn,
    ProWSyn,
    #[serde(rename = "SMOTE_IPF")]
    SmoteIpf,
    #[serde(rename = "SMOTE_TomekLinks")]
    SmoteTomekLinks,
    None,
}

impl ResamplerKind {
    pub const ALL: [ResamplerKind; 8] = [
        ResamplerKind::ClusterCentroids,
        ResamplerKind::ClusterRepresentatives,
        ResamplerKind::Smote,
        ResamplerKind::Adasyn,
        ResamplerKind::ProWSyn,
        ResamplerKind::SmoteIpf,
        ResamplerKind::SmoteTomekLinks,
        ResamplerKind::None,
    ];

    /// The seven balancing kinds (everything except `None`).
    pub fn balancing() -> impl Iterator<Item = ResamplerKind> {
        Self::ALL.into_iter().filter(|k| *k != ResamplerKind::None)
    }

    /// Identifier used in configs and pipeline ids.
    pub fn config_name(self) -> &'static str {
        match self {
            ResamplerKind::ClusterCentroids => "ClusterCentroids",
            ResamplerKind::ClusterRepresentatives => "ClusterRepresentatives",
            ResamplerKind::Smote => "SMOTE",
            ResamplerKind::Adasyn => "ADASYN",
            ResamplerKind::ProWSyn => "ProWSyn",
            ResamplerKind::SmoteIpf => "SMOTE_IPF",
            ResamplerKind::SmoteTomekLinks => "SMOTE_TomekLinks",
            ResamplerKind::None => "None",
        }
    }

    /// Human-readable name for report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ResamplerKind::ClusterCentroids => "Cluster Centroids",
            ResamplerKind::ClusterRepresentatives => "Cluster Representatives",
            ResamplerKind::Smote => "SMOTE",
            ResamplerKind::Adasyn => "ADASYN",
            ResamplerKind::ProWSyn => "ProWSyn",
            ResamplerKind::SmoteIpf => "SMOTE-IPF",
            ResamplerKind::SmoteTomekLinks => "SMOTE-TomekLinks",
            ResamplerKind::None => "None",
        }
    }

    pub fn parse(s: &str) -> Option<ResamplerKind> {
        Self::ALL.into_iter().find(|k| k.config_name() == s)
    }

    pub fn is_undersampler(self) -> bool {
        matches!(self, ResamplerKind::ClusterCentroids | ResamplerKind::ClusterRepresentatives)
    }
}

impl fmt::Display for ResamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.config_name())
    }
}

/// Algorithm identity plus parameters. Every field except `kind` has a default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResamplerSpec {
    pub kind: ResamplerKind,
    pub k_neighbors: usize,
    pub seed: u64,
    /// ProWSyn proximity levels.
    pub levels: usize,
    /// ProWSyn level-weight decay.
    pub theta: f64,
    /// SMOTE-IPF partitions per iteration.
    pub partitions: usize,
    pub filter_depth: usize,
    /// SMOTE-IPF stops after `patience` consecutive iterations that each
    /// remove less than this fraction of the set.
    pub stop_fraction: f64,
    pub patience: usize,
    pub max_iterations: usize,
}

impl Default for ResamplerSpec {
    fn default() -> Self {
        Self {
            kind: ResamplerKind::None,
            k_neighbors: 5,
            seed: 0,
            levels: 5,
            theta: 1.0,
            partitions: 9,
            filter_depth: 5,
            stop_fraction: 0.01,
            patience: 3,
            max_iterations: 50,
        }
    }
}

impl ResamplerSpec {
    pub fn new(kind: ResamplerKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::invalid("k_neighbors must be >= 1"));
        }
        if self.levels == 0 {
            return Err(Error::invalid("ProWSyn levels must be >= 1"));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::invalid(format!("ProWSyn theta {} outside (0, 1]", self.theta)));
        }
        if self.partitions < 2 {
            return Err(Error::invalid("SMOTE-IPF needs at least 2 partitions"));
        }
        if self.filter_depth == 0 || self.patience == 0 || self.max_iterations == 0 {
            return Err(Error::invalid("SMOTE-IPF depth, patience and max_iterations must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.stop_fraction) {
            return Err(Error::invalid("SMOTE-IPF stop_fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Balanced output with a per-row flag marking generated samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledSet {
    pub data: Dataset,
    pub synthetic: Vec<bool>,
    /// Rows removed by a cleaning step (Tomek links, IPF).
    pub cleaned: usize,
    pub warnings: Vec<String>,
}

impl ResampledSet {
    fn unchanged(data: &Dataset) -> Self {
        Self {
            data: data.clone(),
            synthetic: vec![false; data.n_rows()],
            cleaned: 0,
            warnings: Vec::new(),
        }
    }

    pub fn n_synthetic(&self) -> usize {
        self.synthetic.iter().filter(|&&s| s).count()
    }
}

/// Dispatches on `spec.kind`.
pub fn resample(data: &Dataset, spec: &ResamplerSpec) -> Result<ResampledSet> {
    spec.validate()?;
    match spec.kind {
        ResamplerKind::None => {
            data.require_target()?;
            Ok(ResampledSet::unchanged(data))
        }
        ResamplerKind::ClusterCentroids => cluster_centroids_undersample(data, spec),
        ResamplerKind::ClusterRepresentatives => cluster_representatives_undersample(data, spec),
        ResamplerKind::Smote => smote_oversample(data, spec, None),
        ResamplerKind::Adasyn => adasyn_oversample(data, spec),
        ResamplerKind::ProWSyn => prowsyn_oversample(data, spec),
        ResamplerKind::SmoteIpf => smote_ipf(data, spec),
        ResamplerKind::SmoteTomekLinks => smote_tomek(data, spec),
    }
}

/// Row indices of each class and which label is the minority.
pub(crate) struct ClassSplit {
    pub minority_label: u8,
    pub minority: Vec<usize>,
    pub majority: Vec<usize>,
}

/// Splits rows by class. On equal counts the positive class counts as minority.
pub(crate) fn split_classes(data: &Dataset) -> Result<ClassSplit> {
    let y = data.require_target()?;
    let (mut neg, mut pos) = (Vec::new(), Vec::new());
    for (i, &t) in y.iter().enumerate() {
        if t == 1 {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    if neg.is_empty() || pos.is_empty() {
        return Err(Error::SingleClass);
    }
    Ok(if pos.len() <= neg.len() {
        ClassSplit {
            minority_label: 1,
            minority: pos,
            majority: neg,
        }
    } else {
        ClassSplit {
            minority_label: 0,
            minority: neg,
            majority: pos,
        }
    })
}

/// Appends generated rows to `data`; `sources` gives the row whose raw label
/// each new row inherits.
pub(crate) fn append_rows(
    data: &Dataset,
    rows: Vec<Vec<f64>>,
    sources: &[usize],
    label: u8,
) -> Result<ResampledSet> {
    let (n, d) = data.features().dim();
    let total = n + rows.len();
    let mut features = Array2::zeros((total, d));
    features.slice_mut(ndarray::s![..n, ..]).assign(data.features());
    for (k, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            features[[n + k, j]] = *v;
        }
    }
    let mut labels = data.raw_labels().to_vec();
    labels.extend(sources.iter().map(|&s| data.raw_labels()[s].clone()));
    let mut target = data.require_target()?.to_vec();
    target.extend(std::iter::repeat_n(label, rows.len()));
    let out = Dataset::new(features, data.feature_names().to_vec(), labels)?.with_target(target.into())?;
    let mut synthetic = vec![false; n];
    synthetic.resize(total, true);
    Ok(ResampledSet {
        data: out,
        synthetic,
        cleaned: 0,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
pub(crate) mod testutil {
    use ndarray::Array2;
    use rand::Rng as _;
    use rand_distr::{Distribution, Normal};

    use crate::dataset::Dataset;
    use crate::util::{self, rng_from_seed};

    /// Two Gaussian blobs; class 1 is the minority.
    pub fn blobs(n_major: usize, n_minor: usize, d: usize, gap: f64, seed: u64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let n = n_major + n_minor;
        let x = Array2::from_shape_fn((n, d), |(i, _)| {
            let c = if i < n_major { 0.0 } else { gap };
            c + normal.sample(&mut rng)
        });
        let y = (0..n).map(|i| u8::from(i >= n_major)).collect();
        let names = (0..d).map(|j| format!("f{j}")).collect();
        Dataset::from_target(x, names, y).unwrap()
    }

    pub fn random_points(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(0.0..1.0));
        let y = (0..n).map(|_| u8::from(rng.random_bool(0.3))).collect();
        let names = (0..d).map(|j| format!("f{j}")).collect();
        Dataset::from_target(x, names, y).unwrap()
    }

    /// True when `s` lies on the segment between some pair of `pool` rows.
    pub fn on_some_segment(pool: &Array2<f64>, rows: &[usize], s: &[f64]) -> bool {
        rows.iter().any(|&a| {
            rows.iter().any(|&b| {
                let (pa, pb) = (util::row(pool, a), util::row(pool, b));
                (util::euclidean(pa, s) + util::euclidean(s, pb) - util::euclidean(pa, pb)).abs() < 1e-9
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::blobs;
    use super::*;

    #[test]
    fn names_round_trip() {
        for kind in ResamplerKind::ALL {
            assert_eq!(ResamplerKind::parse(kind.config_name()), Some(kind));
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.config_name()));
        }
        assert_eq!(ResamplerKind::parse("smote"), None);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad = [
            ResamplerSpec {
                k_neighbors: 0,
                ..Default::default()
            },
            ResamplerSpec {
                levels: 0,
                ..Default::default()
            },
            ResamplerSpec {
                theta: 0.0,
                ..Default::default()
            },
            ResamplerSpec {
                partitions: 1,
                ..Default::default()
            },
        ];
        for spec in bad {
            assert!(spec.validate().is_err(), "{spec:?}");
        }
    }

    #[test]
    fn none_is_identity() {
        let data = blobs(40, 6, 3, 3.0, 1);
        let out = resample(&data, &ResamplerSpec::new(ResamplerKind::None, 1)).unwrap();
        assert_eq!(out.data, data);
        assert!(out.synthetic.iter().all(|s| !s));
    }

    #[test]
    fn every_kind_balances() {
        let data = blobs(120, 9, 3, 2.5, 4);
        for kind in ResamplerKind::balancing() {
            let spec = ResamplerSpec::new(kind, 9);
            let out = resample(&data, &spec).unwrap();
            let (neg, pos) = out.data.class_counts().unwrap();
            let before = neg + pos + out.cleaned;
            assert!(before == 240 || before == 18, "{kind}: {before}");
            if !matches!(kind, ResamplerKind::SmoteIpf | ResamplerKind::SmoteTomekLinks) {
                assert_eq!(neg, pos, "{kind}");
            }
        }
    }

    #[test]
    fn identical_inputs_give_identical_outputs() {
        let data = blobs(150, 12, 4, 2.0, 5);
        for kind in ResamplerKind::ALL {
            let spec = ResamplerSpec::new(kind, 77);
            let a = resample(&data, &spec).unwrap();
            let b = resample(&data, &spec).unwrap();
            assert_eq!(a, b, "{kind}");
        }
    }

    #[test]
    fn single_class_is_an_error() {
        let data = blobs(10, 0, 2, 1.0, 1);
        for kind in ResamplerKind::balancing() {
            assert!(matches!(
                resample(&data, &ResamplerSpec::new(kind, 1)),
                Err(Error::SingleClass)
            ));
        }
    }
}
