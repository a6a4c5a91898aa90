//! CART classification trees with weighted samples.
//!
//! Split search is exact for the `best` splitter: candidate thresholds are
//! midpoints between consecutive distinct values. Ties resolve to the lowest
//! feature index, then the lowest threshold.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Gini,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Splitter {
    #[default]
    Best,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaxFeatures {
    #[default]
    All,
    Sqrt,
}

impl MaxFeatures {
    fn count(self, d: usize) -> usize {
        match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub splitter: Splitter,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            criterion: Criterion::Gini,
            splitter: Splitter::Best,
            max_depth: None,
            min_samples_split: 2,
            max_features: MaxFeatures::All,
        }
    }
}

/// Impurity of a node with the given (class 0, class 1) weights.
pub fn impurity(criterion: Criterion, counts: [f64; 2]) -> f64 {
    let total = counts[0] + counts[1];
    if total <= 0.0 {
        return 0.0;
    }
    match criterion {
        Criterion::Gini => 1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>(),
        Criterion::Entropy => -counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|c| {
                let p = c / total;
                p * p.log2()
            })
            .sum::<f64>(),
    }
}

/// Weighted impurity after a split; `left`/`right` are (class 0, class 1) counts.
pub fn split_quality(criterion: Criterion, left: [f64; 2], right: [f64; 2]) -> Result<f64> {
    if left.iter().chain(&right).any(|&c| c < 0.0 || !c.is_finite()) {
        return Err(Error::invalid("split counts must be finite and non-negative"));
    }
    let nl = left[0] + left[1];
    let nr = right[0] + right[1];
    let n = nl + nr;
    if n <= 0.0 {
        return Err(Error::invalid("split has no samples"));
    }
    Ok((nl / n) * impurity(criterion, left) + (nr / n) * impurity(criterion, right))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Weighted fraction of class 1 in the leaf.
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

impl DecisionTree {
    /// Positive-class fraction of the leaf reached by `x`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.score(x) > 0.5)
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Single-split tree: `x[feature] <= threshold` goes to `left_value`.
    pub fn stump(n_features: usize, feature: usize, threshold: f64, left_value: f64, right_value: f64) -> Self {
        Self {
            nodes: vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: left_value },
                Node::Leaf { value: right_value },
            ],
            n_features,
        }
    }

    /// Fits on rows `indices` of `x` (repeats allowed, as in a bootstrap).
    pub fn fit(
        x: &Array2<f64>,
        y: &[u8],
        weights: &[f64],
        indices: &[usize],
        params: &TreeParams,
        rng: &mut Rng,
    ) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InsufficientData("tree fit on zero samples".into()));
        }
        let d = x.ncols();
        let mut nodes = Vec::new();
        let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, indices.to_vec(), 0)];
        nodes.push(Node::Leaf { value: 0.0 });
        let n_try = params.max_features.count(d);
        while let Some((slot, idx, depth)) = stack.pop() {
            let mut counts = [0.0f64; 2];
            for &i in &idx {
                counts[y[i] as usize] += weights[i];
            }
            let total = counts[0] + counts[1];
            let value = if total > 0.0 { counts[1] / total } else { 0.0 };
            nodes[slot] = Node::Leaf { value };
            let pure = counts[0] <= 0.0 || counts[1] <= 0.0;
            if pure
                || idx.len() < params.min_samples_split
                || params.max_depth.is_some_and(|m| depth >= m)
            {
                continue;
            }
            let mut features: Vec<usize> = if n_try < d {
                sample(rng, d, n_try).into_vec()
            } else {
                (0..d).collect()
            };
            features.sort_unstable();
            let found = match params.splitter {
                Splitter::Best => best_split(x, y, weights, &idx, &features, params.criterion),
                Splitter::Random => random_split(x, y, weights, &idx, &features, params.criterion, rng),
            };
            let Some((feature, threshold)) = found else {
                continue;
            };
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| x[[i, feature]] <= threshold);
            let left = nodes.len();
            nodes.push(Node::Leaf { value });
            let right = nodes.len();
            nodes.push(Node::Leaf { value });
            nodes[slot] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
            // right first so the left subtree is numbered first
            stack.push((right, right_idx, depth + 1));
            stack.push((left, left_idx, depth + 1));
        }
        Ok(Self {
            nodes,
            n_features: d,
        })
    }
}

const IMPROVEMENT_EPS: f64 = 1e-12;

fn best_split(
    x: &Array2<f64>,
    y: &[u8],
    w: &[f64],
    idx: &[usize],
    features: &[usize],
    criterion: Criterion,
) -> Option<(usize, f64)> {
    let mut totals = [0.0f64; 2];
    for &i in idx {
        totals[y[i] as usize] += w[i];
    }
    let mut best: Option<(f64, usize, f64)> = None;
    let mut column: Vec<(f64, usize)> = Vec::with_capacity(idx.len());
    for &f in features {
        column.clear();
        column.extend(idx.iter().map(|&i| (x[[i, f]], i)));
        column.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut left = [0.0f64; 2];
        for k in 0..column.len() - 1 {
            let (v, i) = column[k];
            left[y[i] as usize] += w[i];
            let next = column[k + 1].0;
            if next <= v {
                continue;
            }
            let right = [totals[0] - left[0], totals[1] - left[1]];
            let q = split_quality(criterion, left, [right[0].max(0.0), right[1].max(0.0)])
                .unwrap_or(f64::INFINITY);
            if best.is_none_or(|b| q < b.0 - IMPROVEMENT_EPS) {
                let mut t = v + (next - v) / 2.0;
                if t >= next {
                    t = v;
                }
                best = Some((q, f, t));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

fn random_split(
    x: &Array2<f64>,
    y: &[u8],
    w: &[f64],
    idx: &[usize],
    features: &[usize],
    criterion: Criterion,
    rng: &mut Rng,
) -> Option<(usize, f64)> {
    let mut best: Option<(f64, usize, f64)> = None;
    for &f in features {
        let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            let v = x[[i, f]];
            (lo.min(v), hi.max(v))
        });
        if hi <= lo {
            continue;
        }
        let mut t = lo + rng.random::<f64>() * (hi - lo);
        if t >= hi {
            t = lo;
        }
        let mut left = [0.0f64; 2];
        let mut right = [0.0f64; 2];
        for &i in idx {
            if x[[i, f]] <= t {
                left[y[i] as usize] += w[i];
            } else {
                right[y[i] as usize] += w[i];
            }
        }
        let q = split_quality(criterion, left, right).unwrap_or(f64::INFINITY);
        if best.is_none_or(|b| q < b.0 - IMPROVEMENT_EPS) {
            best = Some((q, f, t));
        }
    }
    best.map(|(_, f, t)| (f, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::rng_from_seed;
    use ndarray::array;

    #[test]
    fn split_quality_examples() {
        assert_eq!(split_quality(Criterion::Gini, [0.0, 4.0], [3.0, 0.0]).unwrap(), 0.0);
        assert_eq!(split_quality(Criterion::Entropy, [0.0, 4.0], [3.0, 0.0]).unwrap(), 0.0);
        assert_eq!(impurity(Criterion::Gini, [5.0, 5.0]), 0.5);
        assert_eq!(impurity(Criterion::Entropy, [5.0, 5.0]), 1.0);
        // an unsplit 50/50 node placed entirely on one side
        assert_eq!(split_quality(Criterion::Gini, [2.0, 2.0], [0.0, 0.0]).unwrap(), 0.5);
        assert!(split_quality(Criterion::Gini, [0.0, 0.0], [0.0, 0.0]).is_err());
        assert!(split_quality(Criterion::Gini, [-1.0, 0.0], [1.0, 0.0]).is_err());
    }

    #[test]
    fn stump_routes_left_on_threshold() {
        let t = DecisionTree::stump(2, 0, 0.5, 1.0, 0.0);
        assert_eq!(t.predict(&[0.2, 9.0]), 1);
        assert_eq!(t.predict(&[0.5, 9.0]), 1);
        assert_eq!(t.predict(&[0.7, 9.0]), 0);
    }

    #[test]
    fn unbounded_tree_memorizes_xor() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0], [0.2, 0.9], [0.8, 0.1]];
        let y = [0u8, 1, 1, 0, 1, 1];
        let w = vec![1.0; 6];
        let idx: Vec<usize> = (0..6).collect();
        for criterion in [Criterion::Gini, Criterion::Entropy] {
            for splitter in [Splitter::Best, Splitter::Random] {
                let p = TreeParams {
                    criterion,
                    splitter,
                    ..Default::default()
                };
                let t = DecisionTree::fit(&x, &y, &w, &idx, &p, &mut rng_from_seed(3)).unwrap();
                for i in 0..6 {
                    assert_eq!(t.predict(crate::util::row(&x, i)), y[i]);
                }
            }
        }
    }

    #[test]
    fn tie_break_prefers_lowest_feature() {
        // both features separate the classes perfectly
        let x = array![[0.0, 0.0], [1.0, 1.0]];
        let t = DecisionTree::fit(
            &x,
            &[0, 1],
            &[1.0, 1.0],
            &[0, 1],
            &TreeParams::default(),
            &mut rng_from_seed(0),
        )
        .unwrap();
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 0.5);
            }
            n => panic!("expected split, got {n:?}"),
        }
    }

    #[test]
    fn depth_limit_is_respected() {
        let x = Array2::from_shape_fn((64, 1), |(i, _)| i as f64);
        let y: Vec<u8> = (0..64).map(|i| (i % 2) as u8).collect();
        let p = TreeParams {
            max_depth: Some(3),
            ..Default::default()
        };
        let idx: Vec<usize> = (0..64).collect();
        let t = DecisionTree::fit(&x, &y, &vec![1.0; 64], &idx, &p, &mut rng_from_seed(0)).unwrap();
        assert!(t.depth() <= 3);
    }
}
