//! One-hidden-layer perceptron with a logistic output unit, trained on
//! binary cross-entropy by mini-batch SGD (momentum) or Adam.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::util::{self, rng_from_seed, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Logistic,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Logistic => sigmoid(z),
        }
    }

    /// Derivative expressed through the activation output `a` (and `z` for relu).
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Logistic => a * (1.0 - a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: usize,
    pub activation: Activation,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    /// L2 penalty.
    pub alpha: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a `tol` improvement of the training loss before stopping.
    pub patience: usize,
    pub tol: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: 100,
            activation: Activation::Relu,
            optimizer: Optimizer::Adam,
            learning_rate: 1e-3,
            alpha: 1e-4,
            batch_size: 32,
            max_epochs: 200,
            patience: 20,
            tol: 1e-4,
        }
    }
}

/// Network parameters flattened as `[W1 (hidden x inputs), b1, w2, b2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNetwork {
    pub inputs: usize,
    pub hidden: usize,
    pub activation: Activation,
    pub params: Vec<f64>,
}

impl MlpNetwork {
    pub fn param_count(inputs: usize, hidden: usize) -> usize {
        hidden * inputs + hidden + hidden + 1
    }

    /// Glorot-uniform initialization.
    pub fn init(inputs: usize, hidden: usize, activation: Activation, rng: &mut util::Rng) -> Self {
        let mut params = vec![0.0; Self::param_count(inputs, hidden)];
        let b1 = (6.0 / (inputs + hidden) as f64).sqrt();
        let b2 = (6.0 / (hidden + 1) as f64).sqrt();
        let w1_end = hidden * inputs;
        for p in &mut params[..w1_end] {
            *p = rng.random_range(-b1..b1);
        }
        let w2_start = w1_end + hidden;
        for p in &mut params[w2_start..w2_start + hidden] {
            *p = rng.random_range(-b2..b2);
        }
        Self {
            inputs,
            hidden,
            activation,
            params,
        }
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], f64) {
        let (h, d) = (self.hidden, self.inputs);
        let w1 = &self.params[..h * d];
        let b1 = &self.params[h * d..h * d + h];
        let w2 = &self.params[h * d + h..h * d + 2 * h];
        (w1, b1, w2, self.params[h * d + 2 * h])
    }

    pub fn output_logit(&self, x: &[f64]) -> f64 {
        let (w1, b1, w2, b2) = self.split();
        let d = self.inputs;
        let mut z2 = b2;
        for k in 0..self.hidden {
            let z: f64 = b1[k] + w1[k * d..(k + 1) * d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            z2 += w2[k] * self.activation.apply(z);
        }
        z2
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.output_logit(x))
    }

    /// Mean cross-entropy plus `alpha / 2 * |W|^2 / batch` over `rows`, and its gradient.
    pub fn loss_and_gradient(&self, x: &Array2<f64>, y: &[u8], rows: &[usize], alpha: f64) -> (f64, Vec<f64>) {
        let (w1, b1, w2, b2) = self.split();
        let (h, d) = (self.hidden, self.inputs);
        let m = rows.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let mut z = vec![0.0; h];
        let mut a = vec![0.0; h];
        for &i in rows {
            let xi = util::row(x, i);
            let mut z2 = b2;
            for k in 0..h {
                z[k] = b1[k] + w1[k * d..(k + 1) * d].iter().zip(xi).map(|(w, v)| w * v).sum::<f64>();
                a[k] = self.activation.apply(z[k]);
                z2 += w2[k] * a[k];
            }
            let t = f64::from(y[i]);
            let softplus = if z2 > 0.0 { z2 + (-z2).exp().ln_1p() } else { z2.exp().ln_1p() };
            loss += softplus - t * z2;
            let delta_out = (sigmoid(z2) - t) / m;
            let (gw1, rest) = grad.split_at_mut(h * d);
            let (gb1, rest) = rest.split_at_mut(h);
            let (gw2, gb2) = rest.split_at_mut(h);
            gb2[0] += delta_out;
            for k in 0..h {
                gw2[k] += delta_out * a[k];
                let delta_h = delta_out * w2[k] * self.activation.derivative(z[k], a[k]);
                gb1[k] += delta_h;
                for (g, v) in gw1[k * d..(k + 1) * d].iter_mut().zip(xi) {
                    *g += delta_h * v;
                }
            }
        }
        loss /= m;
        let mut reg = 0.0;
        for (idx, g) in grad.iter_mut().enumerate() {
            let is_weight = idx < h * d || (idx >= h * d + h && idx < h * d + 2 * h);
            if is_weight {
                let w = self.params[idx];
                reg += w * w;
                *g += alpha * w / m;
            }
        }
        (loss + 0.5 * alpha * reg / m, grad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub network: MlpNetwork,
    pub epochs_run: usize,
    pub converged: bool,
    pub loss_curve: Vec<f64>,
}

impl Mlp {
    pub fn fit(x: &Array2<f64>, y: &[u8], params: &MlpParams, seed: u64) -> Self {
        let n = x.nrows();
        let mut rng = rng_from_seed(seed);
        let mut net = MlpNetwork::init(x.ncols(), params.hidden.max(1), params.activation, &mut rng);
        let p = net.params.len();
        let (beta1, beta2, eps, momentum): (f64, f64, f64, f64) = (0.9, 0.999, 1e-8, 0.9);
        let mut m1 = vec![0.0; p];
        let mut m2 = vec![0.0; p];
        let mut step = 0i32;
        let mut order: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        let mut stale = 0;
        let mut curve = Vec::new();
        let mut converged = false;
        let batch = params.batch_size.clamp(1, n.max(1));
        for _ in 0..params.max_epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(batch) {
                let (loss, grad) = net.loss_and_gradient(x, y, chunk, params.alpha);
                epoch_loss += loss * chunk.len() as f64;
                step += 1;
                match params.optimizer {
                    Optimizer::Sgd => {
                        for k in 0..p {
                            m1[k] = momentum * m1[k] - params.learning_rate * grad[k];
                            net.params[k] += m1[k];
                        }
                    }
                    Optimizer::Adam => {
                        let c1 = 1.0 - beta1.powi(step);
                        let c2 = 1.0 - beta2.powi(step);
                        for k in 0..p {
                            m1[k] = beta1 * m1[k] + (1.0 - beta1) * grad[k];
                            m2[k] = beta2 * m2[k] + (1.0 - beta2) * grad[k] * grad[k];
                            net.params[k] -= params.learning_rate * (m1[k] / c1) / ((m2[k] / c2).sqrt() + eps);
                        }
                    }
                }
            }
            let epoch_loss = epoch_loss / n as f64;
            curve.push(epoch_loss);
            if epoch_loss < best - params.tol {
                best = epoch_loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= params.patience {
                    converged = true;
                    break;
                }
            }
        }
        if !converged {
            log::debug!("MLP reached the epoch cap ({}) without a loss plateau", params.max_epochs);
        }
        Self {
            network: net,
            epochs_run: curve.len(),
            converged,
            loss_curve: curve,
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.network.score(x)
    }
}

/// Largest norm-relative discrepancy between the analytic gradient and
/// central finite differences.
pub fn gradient_check(net: &MlpNetwork, x: &Array2<f64>, y: &[u8], alpha: f64, h: f64) -> f64 {
    let rows: Vec<usize> = (0..x.nrows()).collect();
    let (_, analytic) = net.loss_and_gradient(x, y, &rows, alpha);
    let mut numeric = vec![0.0; analytic.len()];
    let mut probe = net.clone();
    for k in 0..analytic.len() {
        let orig = probe.params[k];
        probe.params[k] = orig + h;
        let (lp, _) = probe.loss_and_gradient(x, y, &rows, alpha);
        probe.params[k] = orig - h;
        let (lm, _) = probe.loss_and_gradient(x, y, &rows, alpha);
        probe.params[k] = orig;
        numeric[k] = (lp - lm) / (2.0 * h);
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / na.max(nn).max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = rng_from_seed(11);
        for activation in [Activation::Relu, Activation::Tanh, Activation::Logistic] {
            let net = MlpNetwork::init(5, 8, activation, &mut rng);
            let x = Array2::from_shape_fn((16, 5), |_| rng.random_range(-2.0..2.0));
            let y: Vec<u8> = (0..16).map(|_| u8::from(rng.random::<bool>())).collect();
            let rel = gradient_check(&net, &x, &y, 1e-3, 1e-6);
            assert!(rel < 1e-4, "{activation:?}: {rel}");
        }
    }

    #[test]
    fn learns_a_linear_boundary() {
        let x = Array2::from_shape_fn((120, 2), |(i, j)| (((i * 29 + j * 13) % 41) as f64 - 20.0) / 10.0);
        let y: Vec<u8> = (0..120).map(|i| u8::from(x[[i, 0]] + x[[i, 1]] > 0.0)).collect();
        for optimizer in [Optimizer::Adam, Optimizer::Sgd] {
            let p = MlpParams {
                hidden: 10,
                optimizer,
                learning_rate: 0.01,
                max_epochs: 150,
                ..Default::default()
            };
            let m = Mlp::fit(&x, &y, &p, 3);
            let acc = (0..120).filter(|&i| u8::from(m.score(util::row(&x, i)) > 0.5) == y[i]).count();
            assert!(acc >= 110, "{optimizer:?}: {acc}");
        }
    }
}
