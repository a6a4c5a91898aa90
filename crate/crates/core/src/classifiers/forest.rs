//! Random forests and extremely randomized trees.

use ndarray::Array2;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Criterion, DecisionTree, MaxFeatures, Splitter, TreeParams};
use crate::error::Result;
use crate::util::{derive_seed, rng_from_seed};

/// Bagged or randomized tree ensemble voting by majority.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForestKind {
    /// Bootstrap samples, exact splits over a random feature subset.
    Random,
    /// Full sample, random thresholds over a random feature subset.
    ExtraTrees,
}

impl Forest {
    pub fn fit(
        x: &Array2<f64>,
        y: &[u8],
        kind: ForestKind,
        n_trees: usize,
        criterion: Criterion,
        seed: u64,
    ) -> Result<Self> {
        let n = x.nrows();
        let weights = vec![1.0; n];
        let params = TreeParams {
            criterion,
            splitter: match kind {
                ForestKind::Random => Splitter::Best,
                ForestKind::ExtraTrees => Splitter::Random,
            },
            max_depth: None,
            min_samples_split: 2,
            max_features: MaxFeatures::Sqrt,
        };
        let trees = (0..n_trees.max(1))
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_from_seed(derive_seed(seed, t as u64));
                let indices: Vec<usize> = match kind {
                    ForestKind::Random => (0..n).map(|_| rng.random_range(0..n)).collect(),
                    ForestKind::ExtraTrees => (0..n).collect(),
                };
                DecisionTree::fit(x, y, &weights, &indices, &params, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { trees })
    }

    /// Each member tree's class decision.
    pub fn member_predictions(&self, x: &[f64]) -> Vec<u8> {
        self.trees.iter().map(|t| t.predict(x)).collect()
    }

    /// Fraction of member trees voting for class 1.
    pub fn score(&self, x: &[f64]) -> f64 {
        let votes: usize = self.member_predictions(x).iter().map(|&v| v as usize).sum();
        votes as f64 / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_tree_vote() {
        let f = Forest {
            trees: vec![
                DecisionTree::stump(1, 0, 0.0, 1.0, 1.0),
                DecisionTree::stump(1, 0, 0.0, 1.0, 1.0),
                DecisionTree::stump(1, 0, 0.0, 0.0, 0.0),
            ],
        };
        assert_eq!(f.member_predictions(&[0.3]), vec![1, 1, 0]);
        assert!((f.score(&[0.3]) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn forest_is_deterministic_per_seed() {
        let x = Array2::from_shape_fn((80, 4), |(i, j)| ((i * 31 + j * 17) % 23) as f64 / 7.0);
        let y: Vec<u8> = (0..80).map(|i| u8::from(x[[i, 0]] + x[[i, 2]] > 3.0)).collect();
        for kind in [ForestKind::Random, ForestKind::ExtraTrees] {
            let a = Forest::fit(&x, &y, kind, 12, Criterion::Gini, 5).unwrap();
            let b = Forest::fit(&x, &y, kind, 12, Criterion::Gini, 5).unwrap();
            assert_eq!(a, b);
        }
    }
}
