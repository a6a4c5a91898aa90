//! Gradient boosting on the logistic loss.
//!
//! `gbtree` grows histogram-binned regression trees on second-order
//! gradient statistics; `gblinear` applies regularized coordinate-descent
//! updates to a linear model.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::util::{self, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Booster {
    Gbtree,
    Gblinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub booster: Booster,
    pub learning_rate: f64,
    pub estimators: usize,
    /// Tree depth for `gbtree`.
    pub max_depth: usize,
    /// L2 penalty.
    pub lambda: f64,
    /// L1 penalty.
    pub alpha: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            booster: Booster::Gbtree,
            learning_rate: 0.1,
            estimators: 100,
            max_depth: 3,
            lambda: 1.0,
            alpha: 0.0,
        }
    }
}

const MAX_BINS: usize = 256;
const MIN_CHILD_HESSIAN: f64 = 1e-3;

/// Mean logistic loss of margins against labels.
pub fn logistic_loss(margins: &[f64], y: &[u8]) -> f64 {
    margins
        .iter()
        .zip(y)
        .map(|(&m, &t)| {
            // log(1 + e^m) - t*m, computed stably
            let softplus = if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
            softplus - f64::from(t) * m
        })
        .sum::<f64>()
        / margins.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegNode {
    Leaf {
        weight: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegNode>,
}

impl RegressionTree {
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                RegNode::Leaf { weight } => return *weight,
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoostModel {
    Trees(Vec<RegressionTree>),
    Linear { weights: Vec<f64>, bias: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub base_margin: f64,
    pub learning_rate: f64,
    pub model: BoostModel,
    /// Mean training loss after each round (entry 0 is the initial loss).
    pub loss_history: Vec<f64>,
}

impl GradientBoosting {
    pub fn fit(x: &Array2<f64>, y: &[u8], params: &BoostParams) -> Self {
        let n = x.nrows();
        let pos = y.iter().filter(|&&t| t == 1).count() as f64;
        let prior = (pos / n as f64).clamp(1e-6, 1.0 - 1e-6);
        let base_margin = (prior / (1.0 - prior)).ln();
        let mut margins = vec![base_margin; n];
        let mut history = vec![logistic_loss(&margins, y)];
        let model = match params.booster {
            Booster::Gbtree => {
                let bins = BinnedMatrix::new(x);
                let mut trees = Vec::with_capacity(params.estimators);
                for _ in 0..params.estimators {
                    let (g, h) = gradients(&margins, y);
                    let tree = grow_tree(&bins, &g, &h, params);
                    for (i, m) in margins.iter_mut().enumerate() {
                        *m += params.learning_rate * tree.value(util::row(x, i));
                    }
                    trees.push(tree);
                    history.push(logistic_loss(&margins, y));
                }
                BoostModel::Trees(trees)
            }
            Booster::Gblinear => {
                let d = x.ncols();
                let mut weights = vec![0.0; d];
                let mut bias = 0.0;
                for _ in 0..params.estimators {
                    let (mut g, h) = gradients(&margins, y);
                    // bias: unpenalized Newton step
                    let (sg, sh): (f64, f64) = g.iter().zip(&h).fold((0.0, 0.0), |a, (gi, hi)| (a.0 + gi, a.1 + hi));
                    if sh > 0.0 {
                        let db = -params.learning_rate * sg / sh;
                        bias += db;
                        for i in 0..n {
                            g[i] += h[i] * db;
                            margins[i] += db;
                        }
                    }
                    for j in 0..d {
                        let (mut gj, mut hj) = (0.0, 0.0);
                        for i in 0..n {
                            let v = x[[i, j]];
                            gj += g[i] * v;
                            hj += h[i] * v * v;
                        }
                        let dw = params.learning_rate
                            * coordinate_delta(gj, hj, weights[j], params.lambda, params.alpha);
                        if dw == 0.0 {
                            continue;
                        }
                        weights[j] += dw;
                        for i in 0..n {
                            let v = x[[i, j]];
                            g[i] += h[i] * v * dw;
                            margins[i] += v * dw;
                        }
                    }
                    history.push(logistic_loss(&margins, y));
                }
                BoostModel::Linear { weights, bias }
            }
        };
        Self {
            base_margin,
            learning_rate: params.learning_rate,
            model,
            loss_history: history,
        }
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        match &self.model {
            BoostModel::Trees(trees) => {
                self.base_margin + trees.iter().map(|t| self.learning_rate * t.value(x)).sum::<f64>()
            }
            BoostModel::Linear { weights, bias } => {
                self.base_margin + bias + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            }
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }
}

fn gradients(margins: &[f64], y: &[u8]) -> (Vec<f64>, Vec<f64>) {
    margins
        .iter()
        .zip(y)
        .map(|(&m, &t)| {
            let p = sigmoid(m);
            (p - f64::from(t), (p * (1.0 - p)).max(1e-16))
        })
        .unzip()
}

/// Elastic-net Newton step for one weight; the L1 term clamps at zero.
fn coordinate_delta(grad: f64, hess: f64, w: f64, lambda: f64, alpha: f64) -> f64 {
    let hess = hess + lambda;
    if hess < 1e-5 {
        return 0.0;
    }
    let grad = grad + lambda * w;
    let tmp = w - grad / hess;
    if tmp >= 0.0 {
        (-(grad + alpha) / hess).max(-w)
    } else {
        (-(grad - alpha) / hess).min(-w)
    }
}

/// Features quantized once per fit; bin `b` covers values `<= edges[b]`.
struct BinnedMatrix {
    bins: Vec<Vec<u16>>,
    edges: Vec<Vec<f64>>,
}

impl BinnedMatrix {
    fn new(x: &Array2<f64>) -> Self {
        let (n, d) = x.dim();
        let mut bins = Vec::with_capacity(d);
        let mut edges = Vec::with_capacity(d);
        for j in 0..d {
            let mut col: Vec<f64> = x.column(j).to_vec();
            col.sort_by(f64::total_cmp);
            col.dedup();
            let e: Vec<f64> = if col.len() <= MAX_BINS {
                col.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect()
            } else {
                let mut e: Vec<f64> = (1..MAX_BINS)
                    .map(|b| {
                        let pos = b * (col.len() - 1) / MAX_BINS;
                        col[pos] + (col[pos + 1] - col[pos]) / 2.0
                    })
                    .collect();
                e.dedup();
                e
            };
            let b: Vec<u16> = (0..n)
                .map(|i| e.partition_point(|&edge| edge < x[[i, j]]) as u16)
                .collect();
            bins.push(b);
            edges.push(e);
        }
        Self { bins, edges }
    }
}

fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

fn score_term(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

fn grow_tree(bins: &BinnedMatrix, g: &[f64], h: &[f64], params: &BoostParams) -> RegressionTree {
    let n = g.len();
    let mut nodes = vec![RegNode::Leaf { weight: 0.0 }];
    let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, (0..n).collect(), 0)];
    let d = bins.bins.len();
    while let Some((slot, idx, depth)) = stack.pop() {
        let (gs, hs) = idx.iter().fold((0.0, 0.0), |a, &i| (a.0 + g[i], a.1 + h[i]));
        nodes[slot] = RegNode::Leaf {
            weight: leaf_weight(gs, hs, params.lambda),
        };
        if depth >= params.max_depth || idx.len() < 2 {
            continue;
        }
        let parent = score_term(gs, hs, params.lambda);
        let mut best: Option<(f64, usize, usize)> = None;
        for j in 0..d {
            let nb = bins.edges[j].len() + 1;
            if nb < 2 {
                continue;
            }
            let mut hg = vec![0.0; nb];
            let mut hh = vec![0.0; nb];
            for &i in &idx {
                let b = bins.bins[j][i] as usize;
                hg[b] += g[i];
                hh[b] += h[i];
            }
            let (mut gl, mut hl) = (0.0, 0.0);
            for b in 0..nb - 1 {
                gl += hg[b];
                hl += hh[b];
                let (gr, hr) = (gs - gl, hs - hl);
                if hl < MIN_CHILD_HESSIAN || hr < MIN_CHILD_HESSIAN {
                    continue;
                }
                let gain = 0.5 * (score_term(gl, hl, params.lambda) + score_term(gr, hr, params.lambda) - parent);
                if gain > 1e-12 && best.is_none_or(|bst| gain > bst.0 + 1e-12) {
                    best = Some((gain, j, b));
                }
            }
        }
        let Some((_, feature, bin)) = best else {
            continue;
        };
        let threshold = bins.edges[feature][bin];
        let (li, ri): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| bins.bins[feature][i] as usize <= bin);
        let left = nodes.len();
        nodes.push(RegNode::Leaf { weight: 0.0 });
        let right = nodes.len();
        nodes.push(RegNode::Leaf { weight: 0.0 });
        nodes[slot] = RegNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        stack.push((right, ri, depth + 1));
        stack.push((left, li, depth + 1));
    }
    RegressionTree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (Array2<f64>, Vec<u8>) {
        let x = Array2::from_shape_fn((300, 3), |(i, j)| (((i * 53 + j * 29) % 97) as f64 - 48.0) / 20.0);
        let y: Vec<u8> = (0..300)
            .map(|i| u8::from(x[[i, 0]] - 0.5 * x[[i, 1]] + 0.3 * ((i % 7) as f64 - 3.0) > 0.2))
            .collect();
        (x, y)
    }

    #[test]
    fn loss_never_increases_for_small_learning_rates() {
        let (x, y) = fixture();
        for booster in [Booster::Gbtree, Booster::Gblinear] {
            for lr in [0.1, 0.01] {
                let p = BoostParams {
                    booster,
                    learning_rate: lr,
                    estimators: 40,
                    ..Default::default()
                };
                let m = GradientBoosting::fit(&x, &y, &p);
                for w in m.loss_history.windows(2) {
                    assert!(w[1] <= w[0] + 1e-12, "{booster:?} lr={lr}: {} -> {}", w[0], w[1]);
                }
                assert!(m.loss_history.last().unwrap() < &m.loss_history[0]);
            }
        }
    }

    #[test]
    fn binned_thresholds_agree_with_raw_comparisons() {
        let (x, y) = fixture();
        let p = BoostParams::default();
        let m = GradientBoosting::fit(&x, &y, &p);
        // replaying margins through raw-threshold traversal reproduces the loss
        let margins: Vec<f64> = (0..x.nrows()).map(|i| m.margin(util::row(&x, i))).collect();
        let replay = logistic_loss(&margins, &y);
        assert!((replay - m.loss_history.last().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn l1_step_stops_at_zero() {
        // the L1 pull would overshoot zero from the positive side; clamp to zero
        assert_eq!(coordinate_delta(0.3, 1.0, 0.5, 0.0, 1.0), -0.5);
        // no penalty: plain Newton step
        assert_eq!(coordinate_delta(2.0, 4.0, 0.0, 0.0, 0.0), -0.5);
    }
}
