//! Lloyd's k-means with k-means++ seeding.

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{self, derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Stop once no centroid moves further than this (Euclidean).
    pub tol: f64,
    /// Independent restarts; the lowest-inertia run wins.
    pub n_init: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-6,
            n_init: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub centroids: Array2<f64>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

impl KMeansModel {
    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    /// Members of cluster `c`, ascending.
    pub fn members(&self, c: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == c)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Fits k-means with the default options.
pub fn kmeans_fit(points: &Array2<f64>, k: usize, seed: u64) -> Result<KMeansModel> {
    kmeans_fit_with(points, k, seed, KMeansOptions::default())
}

pub fn kmeans_fit_with(
    points: &Array2<f64>,
    k: usize,
    seed: u64,
    options: KMeansOptions,
) -> Result<KMeansModel> {
    let n = points.nrows();
    if k == 0 {
        return Err(Error::invalid("k-means needs k >= 1"));
    }
    if k > n {
        return Err(Error::invalid(format!("k-means with k={k} > n={n}")));
    }
    let points = points.as_standard_layout().to_owned();
    let mut best: Option<KMeansModel> = None;
    for run in 0..options.n_init.max(1) {
        let model = lloyd(&points, k, derive_seed(seed, run as u64), options);
        if best.as_ref().is_none_or(|b| model.inertia < b.inertia) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one run"))
}

fn plus_plus_init(points: &Array2<f64>, k: usize, seed: u64) -> Array2<f64> {
    let (n, d) = points.dim();
    let mut rng = rng_from_seed(seed);
    let mut centroids = Array2::zeros((k, d));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&points.row(first));
    let mut chosen = vec![false; n];
    chosen[first] = true;
    let mut d2: Vec<f64> = (0..n)
        .map(|i| util::squared_euclidean(util::row(points, i), util::row(points, first)))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            // guard against rounding running past the last positive weight
            if d2[pick] == 0.0 {
                pick = (0..n).rev().find(|&i| d2[i] > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            // every remaining point coincides with a centroid
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centroids.row_mut(c).assign(&points.row(pick));
        for (i, w) in d2.iter_mut().enumerate() {
            let nd = util::squared_euclidean(util::row(points, i), util::row(points, pick));
            if nd < *w {
                *w = nd;
            }
        }
    }
    centroids
}

fn assign(points: &Array2<f64>, centroids: &Array2<f64>, out: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (i, slot) in out.iter_mut().enumerate() {
        let p = util::row(points, i);
        let mut best = (0, f64::INFINITY);
        for c in 0..centroids.nrows() {
            let d = util::squared_euclidean(p, util::row(centroids, c));
            if d < best.1 {
                best = (c, d);
            }
        }
        *slot = best.0;
        inertia += best.1;
    }
    inertia
}

fn lloyd(points: &Array2<f64>, k: usize, seed: u64, options: KMeansOptions) -> KMeansModel {
    let (n, d) = points.dim();
    let mut centroids = plus_plus_init(points, k, seed);
    let mut assignments = vec![0usize; n];
    let mut iterations = 0;
    for _ in 0..options.max_iter {
        iterations += 1;
        assign(points, &centroids, &mut assignments);
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            let mut s = sums.row_mut(c);
            s += &points.row(i);
        }
        let mut updated = centroids.clone();
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                let mut row = updated.row_mut(c);
                row.assign(&sums.row(c));
                row /= counts[c] as f64;
            } else {
                // empty cluster: re-seed at the point farthest from its centroid
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| {
                        let da = util::squared_euclidean(
                            util::row(points, a),
                            util::row(&centroids, assignments[a]),
                        );
                        let db = util::squared_euclidean(
                            util::row(points, b),
                            util::row(&centroids, assignments[b]),
                        );
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .unwrap_or(0);
                taken[far] = true;
                updated.row_mut(c).assign(&points.row(far));
            }
        }
        let shift = (0..k)
            .map(|c| util::euclidean(util::row(&centroids, c), util::row(&updated, c)))
            .fold(0.0, f64::max);
        centroids = updated;
        if shift < options.tol {
            break;
        }
    }
    let inertia = assign(points, &centroids, &mut assignments);
    KMeansModel {
        centroids,
        assignments,
        inertia,
        iterations,
    }
}
