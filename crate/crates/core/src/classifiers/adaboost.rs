//! Discrete AdaBoost over depth-limited trees.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeParams};
use crate::error::Result;
use crate::util::{self, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub learners: Vec<DecisionTree>,
    pub alphas: Vec<f64>,
    /// Weighted training error of each accepted learner.
    pub errors: Vec<f64>,
    pub stopped_early: bool,
}

/// Stand-in weight for a learner with zero weighted error.
const PERFECT_ALPHA: f64 = 10.0;

impl AdaBoost {
    pub fn fit(
        x: &Array2<f64>,
        y: &[u8],
        n_estimators: usize,
        max_depth: usize,
        seed: u64,
    ) -> Result<Self> {
        let n = x.nrows();
        let mut w = vec![1.0 / n as f64; n];
        let idx: Vec<usize> = (0..n).collect();
        let params = TreeParams {
            max_depth: Some(max_depth),
            ..Default::default()
        };
        let mut rng = rng_from_seed(seed);
        let mut model = AdaBoost {
            learners: Vec::new(),
            alphas: Vec::new(),
            errors: Vec::new(),
            stopped_early: false,
        };
        for _ in 0..n_estimators.max(1) {
            let tree = DecisionTree::fit(x, y, &w, &idx, &params, &mut rng)?;
            let miss: Vec<bool> = (0..n)
                .map(|i| tree.predict(util::row(x, i)) != y[i])
                .collect();
            let total: f64 = w.iter().sum();
            let err: f64 = w.iter().zip(&miss).filter(|(_, &m)| m).map(|(wi, _)| wi).sum::<f64>() / total;
            if err >= 0.5 {
                if model.learners.is_empty() {
                    // nothing better than chance; keep the single learner
                    model.learners.push(tree);
                    model.alphas.push(1.0);
                    model.errors.push(err);
                }
                model.stopped_early = true;
                break;
            }
            if err <= 0.0 {
                model.learners.push(tree);
                model.alphas.push(PERFECT_ALPHA);
                model.errors.push(0.0);
                model.stopped_early = true;
                break;
            }
            let alpha = ((1.0 - err) / err).ln();
            for (wi, &m) in w.iter_mut().zip(&miss) {
                if m {
                    *wi *= alpha.exp();
                }
            }
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|wi| *wi /= s);
            model.learners.push(tree);
            model.alphas.push(alpha);
            model.errors.push(err);
        }
        Ok(model)
    }

    /// Alpha-weighted fraction of the vote for class 1.
    pub fn score(&self, x: &[f64]) -> f64 {
        let total: f64 = self.alphas.iter().sum();
        let pos: f64 = self
            .learners
            .iter()
            .zip(&self.alphas)
            .filter(|(t, _)| t.predict(x) == 1)
            .map(|(_, a)| a)
            .sum();
        pos / total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepted_learners_beat_chance() {
        let x = Array2::from_shape_fn((200, 2), |(i, j)| (((i * 37 + j * 11) % 101) as f64) / 10.0);
        let y: Vec<u8> = (0..200)
            .map(|i| u8::from((x[[i, 0]] - 5.0).powi(2) + (x[[i, 1]] - 5.0).powi(2) < 9.0))
            .collect();
        let m = AdaBoost::fit(&x, &y, 20, 1, 0).unwrap();
        assert!(!m.learners.is_empty());
        for &e in &m.errors {
            assert!(e < 0.5);
        }
        let acc = (0..200)
            .filter(|&i| u8::from(m.score(util::row(&x, i)) > 0.5) == y[i])
            .count();
        assert!(acc > 150);
    }
}
