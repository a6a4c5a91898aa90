//! Balanced-accuracy scoring, stratified folds, leakage-safe cross
//! validation, grid search and mutual-information feature selection.

mod cv;
mod mi;
mod report;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::rng_from_seed;

pub use cv::{
    cross_validate, feature_grid_search, grid_search, CvContext, CvOptions, FeatureSearch, FeatureSubset,
    FoldArtifacts, GridOutcome, Pipeline, PipelineScore,
};
pub use mi::{mutual_information, mutual_information_histogram, select_k_best, FeatureSelection, MI_NEIGHBORS};
pub use report::{score_table_csv, score_table_text, ScoreRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.fp + self.tn
    }
}

/// Counts with class 1 as the positive class.
pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid(format!(
            "{} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::invalid("confusion matrix of zero samples"));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == 1, p == 1) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Mean of the two per-class recalls.
pub fn balanced_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let pos = cm.tp + cm.fn_;
    let neg = cm.tn + cm.fp;
    if pos == 0 || neg == 0 {
        return Err(Error::AbsentClass);
    }
    Ok(0.5 * (cm.tp as f64 / pos as f64 + cm.tn as f64 / neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvPlan {
    pub folds: usize,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self {
            folds: 10,
            stratified: true,
            seed: 0,
        }
    }
}

/// `(train, test)` index lists, both ascending.
pub type Fold = (Vec<usize>, Vec<usize>);

/// K-fold split. When stratified, each class is shuffled and dealt
/// round-robin, continuing where the previous class stopped, so per-class
/// and total fold sizes each differ by at most one.
pub fn stratified_kfold(target: &[u8], plan: &CvPlan) -> Result<Vec<Fold>> {
    let k = plan.folds;
    if k < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    let mut rng = rng_from_seed(plan.seed);
    let mut assignment = vec![0usize; target.len()];
    let groups: Vec<Vec<usize>> = if plan.stratified {
        [0u8, 1]
            .iter()
            .map(|&c| (0..target.len()).filter(|&i| target[i] == c).collect())
            .collect()
    } else {
        vec![(0..target.len()).collect()]
    };
    let mut next = 0;
    for mut group in groups {
        if group.len() < k {
            return Err(Error::InsufficientData(format!(
                "a class has {} samples, fewer than {k} folds",
                group.len()
            )));
        }
        group.shuffle(&mut rng);
        for i in group {
            assignment[i] = next % k;
            next += 1;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..target.len()).partition(|&i| assignment[i] == f);
            (train, test)
        })
        .collect())
}
