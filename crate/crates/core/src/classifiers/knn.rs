use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::neighbors;

/// Memory-based majority vote over the k nearest training points (Euclidean).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub x: Array2<f64>,
    pub y: Vec<u8>,
}

impl Knn {
    pub fn fit(x: &Array2<f64>, y: &[u8], k: usize) -> Self {
        Self {
            k: k.clamp(1, x.nrows().max(1)),
            x: x.as_standard_layout().to_owned(),
            y: y.to_vec(),
        }
    }

    /// Fraction of positives among the k nearest neighbors.
    pub fn score(&self, query: &[f64]) -> f64 {
        let all: Vec<usize> = (0..self.x.nrows()).collect();
        let nn = neighbors::knn_among(&self.x, &all, query, self.k, None);
        let pos = nn.iter().filter(|(i, _)| self.y[*i] == 1).count();
        pos as f64 / nn.len() as f64
    }
}
