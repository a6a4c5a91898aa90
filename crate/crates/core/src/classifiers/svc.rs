//! Kernel support vector classifier trained by budgeted Pegasos-style
//! stochastic subgradient descent on the hinge loss.
//!
//! This approximates the exact dual solution. The kernel is augmented with a
//! constant 1 so the model carries an implicit bias.

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::util::{self, rng_from_seed, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Poly { degree: u32 },
    Rbf,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvcParams {
    pub kernel: Kernel,
    pub c: f64,
    /// Passes over the training set.
    pub epochs: usize,
    /// Maximum number of retained support vectors.
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svc {
    pub kernel: Kernel,
    pub gamma: f64,
    pub coef0: f64,
    pub support: Array2<f64>,
    pub coefficients: Vec<f64>,
}

fn kernel_value(kernel: Kernel, gamma: f64, coef0: f64, a: &[f64], b: &[f64]) -> f64 {
    let k = match kernel {
        Kernel::Rbf => (-gamma * util::squared_euclidean(a, b)).exp(),
        Kernel::Poly { degree } => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            (gamma * dot + coef0).powi(degree as i32)
        }
        Kernel::Sigmoid => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            (gamma * dot + coef0).tanh()
        }
    };
    k + 1.0
}

impl Svc {
    pub fn fit(x: &Array2<f64>, y: &[u8], params: &SvcParams, seed: u64) -> Self {
        let (n, d) = x.dim();
        let var = {
            let m = x.mean().unwrap_or(0.0);
            x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len().max(1) as f64
        };
        // scale heuristic: 1 / (d * Var(X))
        let gamma = if var > 0.0 { 1.0 / (d as f64 * var) } else { 1.0 };
        let coef0 = 0.0;
        let lambda = 1.0 / (params.c * n as f64);
        let signs: Vec<f64> = y.iter().map(|&t| if t == 1 { 1.0 } else { -1.0 }).collect();
        let mut rng = rng_from_seed(seed);
        // (training index, alpha count)
        let mut support: Vec<(usize, f64)> = Vec::new();
        let steps = params.epochs.max(1) * n;
        for t in 1..=steps {
            let i = rng.random_range(0..n);
            let xi = util::row(x, i);
            let f: f64 = support
                .iter()
                .map(|&(j, a)| a * signs[j] * kernel_value(params.kernel, gamma, coef0, util::row(x, j), xi))
                .sum::<f64>()
                / (lambda * t as f64);
            if signs[i] * f < 1.0 {
                match support.iter_mut().find(|(j, _)| *j == i) {
                    Some(entry) => entry.1 += 1.0,
                    None => support.push((i, 1.0)),
                }
                if support.len() > params.budget.max(1) {
                    let drop = support
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(a.1 .0.cmp(&b.1 .0)))
                        .map(|(pos, _)| pos)
                        .expect("non-empty support");
                    support.remove(drop);
                }
            }
        }
        support.sort_by_key(|&(j, _)| j);
        let scale = 1.0 / (lambda * steps as f64);
        let rows: Vec<usize> = support.iter().map(|&(j, _)| j).collect();
        Self {
            kernel: params.kernel,
            gamma,
            coef0,
            support: util::take_rows(x, &rows),
            coefficients: support.iter().map(|&(j, a)| a * signs[j] * scale).collect(),
        }
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(k, c)| c * kernel_value(self.kernel, self.gamma, self.coef0, util::row(&self.support, k), x))
            .sum()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }
}
