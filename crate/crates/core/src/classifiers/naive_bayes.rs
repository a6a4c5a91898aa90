use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Gaussian naive Bayes with per-class, per-feature variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
    pub log_priors: [f64; 2],
}

/// Fraction of the largest feature variance added to every variance.
const VAR_SMOOTHING: f64 = 1e-9;

impl GaussianNb {
    pub fn fit(x: &Array2<f64>, y: &[u8]) -> Self {
        let (n, d) = x.dim();
        let mut means = [vec![0.0; d], vec![0.0; d]];
        let mut vars = [vec![0.0; d], vec![0.0; d]];
        let mut counts = [0usize; 2];
        for (i, &c) in y.iter().enumerate() {
            counts[c as usize] += 1;
            for j in 0..d {
                means[c as usize][j] += x[[i, j]];
            }
        }
        for c in 0..2 {
            if counts[c] > 0 {
                means[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
            }
        }
        for (i, &c) in y.iter().enumerate() {
            let c = c as usize;
            for j in 0..d {
                let dv = x[[i, j]] - means[c][j];
                vars[c][j] += dv * dv;
            }
        }
        for c in 0..2 {
            if counts[c] > 0 {
                vars[c].iter_mut().for_each(|v| *v /= counts[c] as f64);
            }
        }
        let max_var = x
            .columns()
            .into_iter()
            .map(|col| {
                let m = col.mean().unwrap_or(0.0);
                col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64
            })
            .fold(0.0f64, f64::max);
        let eps = (VAR_SMOOTHING * max_var).max(1e-12);
        for v in vars.iter_mut().flatten() {
            *v += eps;
        }
        let log_priors = [0, 1].map(|c| {
            if counts[c] == 0 {
                f64::NEG_INFINITY
            } else {
                (counts[c] as f64 / n as f64).ln()
            }
        });
        Self {
            means,
            variances: vars,
            log_priors,
        }
    }

    fn joint_log_likelihood(&self, c: usize, x: &[f64]) -> f64 {
        let mut ll = self.log_priors[c];
        for (j, &v) in x.iter().enumerate() {
            let var = self.variances[c][j];
            let dv = v - self.means[c][j];
            ll -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + dv * dv / var);
        }
        ll
    }

    /// Posterior probability of class 1.
    pub fn score(&self, x: &[f64]) -> f64 {
        let l0 = self.joint_log_likelihood(0, x);
        let l1 = self.joint_log_likelihood(1, x);
        if l1 == f64::NEG_INFINITY {
            return 0.0;
        }
        if l0 == f64::NEG_INFINITY {
            return 1.0;
        }
        crate::util::sigmoid(l1 - l0)
    }
}
