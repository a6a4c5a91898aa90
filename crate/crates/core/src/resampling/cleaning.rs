//! SMOTE followed by a cleaning pass: Tomek-link removal or the iterative
//! partitioning filter (IPF).

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{smote_oversample, ResampledSet, ResamplerSpec};
use crate::classifiers::tree::{Criterion, DecisionTree, MaxFeatures, Splitter, TreeParams};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::util::{self, derive_seed, rng_from_seed};

/// All Tomek links as ascending `(i, j)` pairs with `i < j`.
///
/// A cross-class pair is a link when no third point is strictly closer to
/// either endpoint than the endpoints are to each other, i.e. each endpoint
/// is a (possibly tied) nearest neighbor of the other.
pub fn tomek_links(data: &Dataset) -> Result<Vec<(usize, usize)>> {
    let y = data.require_target()?;
    let x = data.features();
    let n = data.n_rows();
    if n < 2 {
        return Ok(Vec::new());
    }
    // distance to the nearest other point
    let nearest: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = util::row(x, i);
            (0..n)
                .filter(|&j| j != i)
                .map(|j| util::squared_euclidean(xi, util::row(x, j)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let links: Vec<Vec<(usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = util::row(x, i);
            (i + 1..n)
                .filter(|&j| y[i] != y[j])
                .filter(|&j| {
                    let d = util::squared_euclidean(xi, util::row(x, j));
                    d <= nearest[i] && d <= nearest[j]
                })
                .map(|j| (i, j))
                .collect()
        })
        .collect();
    Ok(links.into_iter().flatten().collect())
}

fn keep_rows(set: ResampledSet, keep: &[usize]) -> ResampledSet {
    let removed = set.data.n_rows() - keep.len();
    ResampledSet {
        data: set.data.select_rows(keep),
        synthetic: keep.iter().map(|&i| set.synthetic[i]).collect(),
        cleaned: set.cleaned + removed,
        warnings: set.warnings,
    }
}

/// SMOTE to balance, then one pass removing both endpoints of every Tomek link.
pub fn smote_tomek(data: &Dataset, spec: &ResamplerSpec) -> Result<ResampledSet> {
    let set = smote_oversample(data, spec, None)?;
    let drop: BTreeSet<usize> = tomek_links(&set.data)?.into_iter().flat_map(|(i, j)| [i, j]).collect();
    let keep: Vec<usize> = (0..set.data.n_rows()).filter(|i| !drop.contains(i)).collect();
    Ok(keep_rows(set, &keep))
}

/// Stratified assignment of `rows` to `p` partitions: each class is
/// shuffled and dealt round-robin.
fn stratified_partitions(y: &[u8], p: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = rng_from_seed(seed);
    let mut parts = vec![Vec::new(); p];
    let mut next = 0;
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            parts[next % p].push(i);
            next += 1;
        }
    }
    for part in &mut parts {
        part.sort_unstable();
    }
    parts
}

/// SMOTE to balance, then the iterative partitioning filter: each round
/// trains one depth-limited tree per stratified partition and drops the
/// rows a majority of trees misclassify. Stops after `patience` consecutive
/// rounds that each remove less than `stop_fraction` of the set.
pub fn smote_ipf(data: &Dataset, spec: &ResamplerSpec) -> Result<ResampledSet> {
    let mut set = smote_oversample(data, spec, None)?;
    let params = TreeParams {
        criterion: Criterion::Gini,
        splitter: Splitter::Best,
        max_depth: Some(spec.filter_depth),
        min_samples_split: 2,
        max_features: MaxFeatures::All,
    };
    let mut quiet = 0;
    for round in 0..spec.max_iterations {
        let n = set.data.n_rows();
        let x = set.data.features();
        let y = set.data.require_target()?.to_vec();
        let parts = stratified_partitions(&y, spec.partitions, derive_seed(spec.seed, round as u64));
        let weights = vec![1.0; n];
        let trees: Vec<Option<DecisionTree>> = parts
            .par_iter()
            .map(|part| {
                if part.is_empty() {
                    return None;
                }
                let mut rng = rng_from_seed(0);
                DecisionTree::fit(x, &y, &weights, part, &params, &mut rng).ok()
            })
            .collect();
        let trees: Vec<DecisionTree> = trees.into_iter().flatten().collect();
        let noisy: Vec<bool> = (0..n)
            .into_par_iter()
            .map(|i| {
                let wrong = trees.iter().filter(|t| t.predict(util::row(x, i)) != y[i]).count();
                2 * wrong > trees.len()
            })
            .collect();
        let keep: Vec<usize> = (0..n).filter(|&i| !noisy[i]).collect();
        let removed = n - keep.len();
        let survivors = keep.iter().filter(|&&i| y[i] == 1).count();
        if survivors == 0 || survivors == keep.len() {
            // never filter a class away entirely
            let msg = format!("SMOTE-IPF round {round} would remove a whole class; stopping");
            log::warn!("{msg}");
            set.warnings.push(msg);
            break;
        }
        if removed > 0 {
            set = keep_rows(set, &keep);
        }
        if (removed as f64) < spec.stop_fraction * n as f64 {
            quiet += 1;
            if quiet >= spec.patience {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Ok(set)
}
