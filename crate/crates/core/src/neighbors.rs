//! Exact nearest-neighbor search by full scan.
//!
//! Results are ordered by (distance, index), so ties resolve to the lower
//! index and the output is independent of thread count.

use ndarray::Array2;
use rayon::prelude::*;

use crate::util;

/// The `k` nearest rows of `candidates` (indices into `pool`) to `query`,
/// skipping `exclude` if given. Returns (index, squared distance) pairs.
pub fn knn_among(
    pool: &Array2<f64>,
    candidates: &[usize],
    query: &[f64],
    k: usize,
    exclude: Option<usize>,
) -> Vec<(usize, f64)> {
    let mut dist: Vec<(usize, f64)> = candidates
        .iter()
        .filter(|&&c| Some(c) != exclude)
        .map(|&c| (c, util::squared_euclidean(util::row(pool, c), query)))
        .collect();
    let k = k.min(dist.len());
    let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k > 0 && k < dist.len() {
        dist.select_nth_unstable_by(k - 1, cmp);
    }
    dist.truncate(k);
    dist.sort_by(cmp);
    dist
}

/// For each index in `queries` (rows of `pool`), its `k` nearest neighbors
/// among `candidates`, excluding itself.
pub fn knn_table(
    pool: &Array2<f64>,
    queries: &[usize],
    candidates: &[usize],
    k: usize,
) -> Vec<Vec<usize>> {
    queries
        .par_iter()
        .map(|&q| {
            knn_among(pool, candidates, util::row(pool, q), k, Some(q))
                .into_iter()
                .map(|(i, _)| i)
                .collect()
        })
        .collect()
}

/// Index of the nearest row of `points` to `query` (lowest index on ties).
pub fn nearest(points: &Array2<f64>, query: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for i in 0..points.nrows() {
        let d = util::squared_euclidean(util::row(points, i), query);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}
