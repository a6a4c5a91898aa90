//! Linear and quadratic discriminant analysis.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LdaSolver {
    Svd,
    Lsqr,
    Eigen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shrinkage {
    None,
    Auto,
}

/// Ridge added to a covariance whose spectrum is numerically singular.
pub const JITTER: f64 = 1e-6;
const DEGENERATE_RATIO: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lda {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub shrinkage: f64,
    pub jittered: bool,
}

fn to_dmatrix(x: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[[i, j]])
}

fn class_means(x: &DMatrix<f64>, y: &[u8]) -> ([DVector<f64>; 2], [usize; 2]) {
    let d = x.ncols();
    let mut sums = [DVector::zeros(d), DVector::zeros(d)];
    let mut counts = [0usize; 2];
    for (i, &c) in y.iter().enumerate() {
        sums[c as usize] += x.row(i).transpose();
        counts[c as usize] += 1;
    }
    for c in 0..2 {
        if counts[c] > 0 {
            sums[c] /= counts[c] as f64;
        }
    }
    (sums, counts)
}

/// Ledoit-Wolf shrinkage intensity for centered data `xc` (rows = samples).
pub fn ledoit_wolf_shrinkage(xc: &DMatrix<f64>) -> f64 {
    let (n, d) = xc.shape();
    if n == 0 || d == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let emp = xc.transpose() * xc / nf;
    let mu = emp.trace() / d as f64;
    let x2 = xc.map(|v| v * v);
    let beta_sum = (x2.transpose() * &x2).sum();
    let delta_sum = (xc.transpose() * xc).map(|v| v * v).sum() / (nf * nf);
    let beta = (beta_sum / nf - delta_sum) / (d as f64 * nf);
    let delta = (delta_sum - 2.0 * mu * emp.trace() + d as f64 * mu * mu) / d as f64;
    let beta = beta.min(delta);
    if beta <= 0.0 || delta <= 0.0 {
        0.0
    } else {
        beta / delta
    }
}

fn is_degenerate(eigenvalues: &DVector<f64>) -> bool {
    let max = eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let min = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    !(min > DEGENERATE_RATIO * max.max(1.0))
}

impl Lda {
    pub fn fit(x: &Array2<f64>, y: &[u8], solver: LdaSolver, shrinkage: Shrinkage) -> Result<Self> {
        let xm = to_dmatrix(x);
        let (n, d) = xm.shape();
        let (means, counts) = class_means(&xm, y);
        if counts[0] == 0 || counts[1] == 0 {
            return Err(Error::SingleClass);
        }
        let xc = DMatrix::from_fn(n, d, |i, j| xm[(i, j)] - means[y[i] as usize][j]);
        let mut cov = xc.transpose() * &xc / n as f64;
        let mut shrink = 0.0;
        if shrinkage == Shrinkage::Auto {
            shrink = ledoit_wolf_shrinkage(&xc);
            let mu = cov.trace() / d as f64;
            cov *= 1.0 - shrink;
            for j in 0..d {
                cov[(j, j)] += shrink * mu;
            }
        }
        let spectrum = SymmetricEigen::new(cov.clone());
        let jittered = is_degenerate(&spectrum.eigenvalues);
        if jittered {
            log::warn!("LDA covariance is singular; adding {JITTER} ridge");
            for j in 0..d {
                cov[(j, j)] += JITTER;
            }
        }
        let delta = &means[1] - &means[0];
        let w: DVector<f64> = match solver {
            LdaSolver::Eigen => {
                let e = SymmetricEigen::new(cov.clone());
                let proj = e.eigenvectors.transpose() * &delta;
                let scaled = DVector::from_fn(d, |k, _| proj[k] / e.eigenvalues[k]);
                &e.eigenvectors * scaled
            }
            LdaSolver::Lsqr => cov
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Training("LDA covariance is not positive definite".into()))?
                .solve(&delta),
            LdaSolver::Svd => {
                if shrinkage == Shrinkage::None && !jittered {
                    // factor the scaled within-class data directly: cov = V S^2 V^T
                    let svd = (&xc / (n as f64).sqrt()).svd(false, true);
                    let v_t = svd.v_t.expect("requested V^T");
                    let proj = &v_t * &delta;
                    let scaled = DVector::from_fn(proj.len(), |k, _| {
                        let s = svd.singular_values[k];
                        proj[k] / (s * s)
                    });
                    v_t.transpose() * scaled
                } else {
                    let svd = cov.clone().svd(true, true);
                    svd.solve(&delta, 0.0)
                        .map_err(|e| Error::Training(format!("LDA SVD solve failed: {e}")))?
                }
            }
        };
        let mid = (&means[0] + &means[1]) * 0.5;
        let log_prior_ratio = (counts[1] as f64 / counts[0] as f64).ln();
        let bias = -w.dot(&mid) + log_prior_ratio;
        Ok(Self {
            weights: w.iter().copied().collect(),
            bias,
            shrinkage: shrink,
            jittered,
        })
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianClass {
    pub mean: Vec<f64>,
    /// Column-major eigenvectors of the class covariance.
    pub eigenvectors: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub log_prior: f64,
}

impl GaussianClass {
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.mean.len();
        let mut maha = 0.0;
        for k in 0..d {
            let col = &self.eigenvectors[k * d..(k + 1) * d];
            let proj: f64 = col
                .iter()
                .zip(x.iter().zip(&self.mean))
                .map(|(v, (xi, mi))| v * (xi - mi))
                .sum();
            maha += proj * proj / self.eigenvalues[k];
        }
        let log_det: f64 = self.eigenvalues.iter().map(|l| l.ln()).sum();
        -0.5 * (log_det + maha + d as f64 * (2.0 * std::f64::consts::PI).ln())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qda {
    pub classes: [GaussianClass; 2],
    pub jittered: bool,
}

impl Qda {
    pub fn fit(x: &Array2<f64>, y: &[u8]) -> Result<Self> {
        let xm = to_dmatrix(x);
        let (n, d) = xm.shape();
        let (means, counts) = class_means(&xm, y);
        if counts[0] == 0 || counts[1] == 0 {
            return Err(Error::SingleClass);
        }
        let mut jittered = false;
        let mut build = |c: usize| {
            let rows: Vec<usize> = (0..n).filter(|&i| y[i] as usize == c).collect();
            let xc = DMatrix::from_fn(rows.len(), d, |r, j| xm[(rows[r], j)] - means[c][j]);
            let denom = (rows.len().max(2) - 1) as f64;
            let mut cov = xc.transpose() * &xc / denom;
            let mut e = SymmetricEigen::new(cov.clone());
            if is_degenerate(&e.eigenvalues) {
                jittered = true;
                for j in 0..d {
                    cov[(j, j)] += JITTER;
                }
                e = SymmetricEigen::new(cov);
            }
            GaussianClass {
                mean: means[c].iter().copied().collect(),
                eigenvectors: e.eigenvectors.as_slice().to_vec(),
                eigenvalues: e.eigenvalues.iter().map(|&l| l.max(JITTER)).collect(),
                log_prior: (counts[c] as f64 / n as f64).ln(),
            }
        };
        let c0 = build(0);
        let c1 = build(1);
        if jittered {
            log::warn!("QDA class covariance is singular; adding {JITTER} ridge");
        }
        Ok(Self {
            classes: [c0, c1],
            jittered,
        })
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        (self.classes[1].log_density(x) + self.classes[1].log_prior)
            - (self.classes[0].log_density(x) + self.classes[0].log_prior)
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}
