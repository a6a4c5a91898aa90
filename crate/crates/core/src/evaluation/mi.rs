//! Mutual information between a continuous feature and the binary target.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::util::{self, rng_from_seed};

/// Neighbor count of the nearest-neighbor estimator.
pub const MI_NEIGHBORS: usize = 3;
const HISTOGRAM_BINS: usize = 32;
const JITTER_SEED: u64 = 0x5EED;

fn check_inputs(column: &[f64], target: &[u8]) -> Result<()> {
    if column.len() != target.len() {
        return Err(Error::invalid("feature and target lengths differ"));
    }
    if column.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "mutual information needs at least 10 samples, got {}",
            column.len()
        )));
    }
    if target.iter().all(|&t| t == target[0]) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Nearest-neighbor estimate (in nats) for a continuous feature and a
/// discrete target, clamped at zero.
///
/// For each sample, `r` is the distance to its k-th nearest neighbor of the
/// same class and `m` counts all samples strictly closer than `r`
/// (itself included). The estimate is
/// ψ(N) + ⟨ψ(k)⟩ − ⟨ψ(N_y)⟩ − ⟨ψ(m)⟩. Samples whose class has a single
/// member are ignored. The column is scaled to unit variance and receives
/// a fixed-seed 1e-10 jitter so ties do not collapse radii to zero.
pub fn mutual_information(column: &[f64], target: &[u8]) -> Result<f64> {
    check_inputs(column, target)?;
    let n = column.len();
    let std = util::std_population(column);
    let scale = if std > 0.0 { 1.0 / std } else { 1.0 };
    let scaled: Vec<f64> = column.iter().map(|v| v * scale).collect();
    let amp = 1e-10 * util::mean(&scaled.iter().map(|v| v.abs()).collect::<Vec<_>>()).max(1.0);
    let mut rng = rng_from_seed(JITTER_SEED);
    let x: Vec<f64> = scaled
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + amp * z
        })
        .collect();

    let class_counts = [
        target.iter().filter(|&&t| t == 0).count(),
        target.iter().filter(|&&t| t == 1).count(),
    ];
    let used: Vec<usize> = (0..n).filter(|&i| class_counts[target[i] as usize] > 1).collect();
    let mut sorted_all: Vec<f64> = used.iter().map(|&i| x[i]).collect();
    sorted_all.sort_by(f64::total_cmp);
    let sorted_class: [Vec<f64>; 2] = [0u8, 1].map(|c| {
        let mut v: Vec<f64> = (0..n).filter(|&i| target[i] == c).map(|i| x[i]).collect();
        v.sort_by(f64::total_cmp);
        v
    });

    let (mut sum_k, mut sum_ny, mut sum_m) = (0.0, 0.0, 0.0);
    for &i in &used {
        let class = &sorted_class[target[i] as usize];
        let k = MI_NEIGHBORS.min(class.len() - 1);
        let r = kth_distance(class, x[i], k);
        let m = count_within(&sorted_all, x[i], r);
        sum_k += digamma(k as f64);
        sum_ny += digamma(class.len() as f64);
        sum_m += digamma(m as f64);
    }
    let nu = used.len() as f64;
    let mi = digamma(nu) + sum_k / nu - sum_ny / nu - sum_m / nu;
    Ok(mi.max(0.0))
}

/// Distance from `v` (a member of `sorted`) to its k-th nearest other member.
fn kth_distance(sorted: &[f64], v: f64, k: usize) -> f64 {
    // any position holding v works: equal values are interchangeable
    let pos = sorted.partition_point(|&s| s < v);
    let (mut lo, mut hi) = (pos, pos + 1);
    let mut dist = 0.0;
    for _ in 0..k {
        let left = if lo > 0 { Some(v - sorted[lo - 1]) } else { None };
        let right = sorted.get(hi).map(|s| s - v);
        dist = match (left, right) {
            (Some(l), Some(r)) if l <= r => {
                lo -= 1;
                l
            }
            (Some(l), None) => {
                lo -= 1;
                l
            }
            (_, Some(r)) => {
                hi += 1;
                r
            }
            (None, None) => unreachable!("k < class size"),
        };
    }
    dist
}

/// Number of entries of `sorted` with |s - v| < r.
fn count_within(sorted: &[f64], v: f64, r: f64) -> usize {
    let start = sorted.partition_point(|&s| s < v && v - s >= r);
    let end = sorted.partition_point(|&s| s <= v || s - v < r);
    end - start
}

/// Plug-in estimate over 32 equal-frequency bins of the feature.
pub fn mutual_information_histogram(column: &[f64], target: &[u8]) -> Result<f64> {
    check_inputs(column, target)?;
    let n = column.len();
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = (1..HISTOGRAM_BINS).map(|b| sorted[b * n / HISTOGRAM_BINS]).collect();
    edges.dedup();
    let bins = edges.len() + 1;
    let mut joint = vec![[0usize; 2]; bins];
    for (&v, &t) in column.iter().zip(target) {
        let b = edges.partition_point(|&e| e <= v);
        joint[b][t as usize] += 1;
    }
    let nf = n as f64;
    let py = [0, 1].map(|c| joint.iter().map(|j| j[c]).sum::<usize>() as f64 / nf);
    let mut mi = 0.0;
    for j in &joint {
        let pb = (j[0] + j[1]) as f64 / nf;
        for c in 0..2 {
            if j[c] > 0 {
                let p = j[c] as f64 / nf;
                mi += p * (p / (pb * py[c])).ln();
            }
        }
    }
    Ok(mi.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    /// MI estimate per feature, in column order.
    pub scores: Vec<f64>,
    /// The k best feature indices by descending score, ties by ascending index.
    pub selected: Vec<usize>,
}

impl FeatureSelection {
    /// Ranks precomputed scores.
    pub fn from_scores(scores: Vec<f64>, k: usize) -> Result<Self> {
        let d = scores.len();
        if k == 0 || k > d {
            return Err(Error::invalid(format!("k={k} outside 1..={d}")));
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        order.truncate(k);
        Ok(Self { scores, selected: order })
    }

    /// Selected indices in ascending column order (the model input order).
    pub fn columns(&self) -> Vec<usize> {
        let mut c = self.selected.clone();
        c.sort_unstable();
        c
    }
}

/// MI score of every feature column.
pub fn feature_scores(data: &Dataset) -> Result<Vec<f64>> {
    let y = data.require_target()?.to_vec();
    let x = data.features();
    (0..data.n_features())
        .into_par_iter()
        .map(|j| mutual_information(&x.column(j).to_vec(), &y))
        .collect()
}

/// The `k` features with the highest mutual information with the target.
pub fn select_k_best(data: &Dataset, k: usize) -> Result<FeatureSelection> {
    if k == 0 || k > data.n_features() {
        return Err(Error::invalid(format!("k={k} outside 1..={}", data.n_features())));
    }
    FeatureSelection::from_scores(feature_scores(data)?, k)
}
