//! The model zoo: specifications, hyperparameter grids, training and
//! prediction for every supported classifier family.
//!
//! All families share one decision rule: class 1 iff the positive-class
//! score is strictly greater than 0.5, so ties go to class 0.

pub mod adaboost;
pub mod boosting;
pub mod discriminant;
pub mod forest;
pub mod knn;
pub mod mlp;
pub mod naive_bayes;
pub mod svc;
pub mod tree;

use std::fmt;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::rng_from_seed;

pub use boosting::Booster;
pub use discriminant::{LdaSolver, Shrinkage};
pub use mlp::{Activation, Optimizer};
pub use svc::Kernel;
pub use tree::{Criterion, Splitter};

/// Classifier family identifiers, as written in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "LDA")]
    Lda,
    #[serde(rename = "QDA")]
    Qda,
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "GNB")]
    Gnb,
    #[serde(rename = "DT")]
    DecisionTree,
    #[serde(rename = "AdaBoost")]
    AdaBoost,
    #[serde(rename = "RF")]
    RandomForest,
    #[serde(rename = "ET")]
    ExtraTrees,
    #[serde(rename = "GB")]
    GradientBoosting,
    #[serde(rename = "SVC")]
    Svc,
    #[serde(rename = "MLP")]
    Mlp,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::Lda,
        Family::Qda,
        Family::Knn,
        Family::Gnb,
        Family::DecisionTree,
        Family::AdaBoost,
        Family::RandomForest,
        Family::ExtraTrees,
        Family::GradientBoosting,
        Family::Svc,
        Family::Mlp,
    ];

    /// Abbreviation used in report rows and pipeline ids (e.g. `XGB-SMOTE_IPF`).
    pub fn short_name(self) -> &'static str {
        match self {
            Family::Lda => "LDA",
            Family::Qda => "QDA",
            Family::Knn => "KNN",
            Family::Gnb => "GNB",
            Family::DecisionTree => "DT",
            Family::AdaBoost => "AdaB",
            Family::RandomForest => "RF",
            Family::ExtraTrees => "ET",
            Family::GradientBoosting => "XGB",
            Family::Svc => "SVC",
            Family::Mlp => "MLP",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        let s = s.trim();
        Family::ALL.into_iter().find(|f| {
            f.short_name().eq_ignore_ascii_case(s)
                || serde_json::to_value(f).ok().and_then(|v| v.as_str().map(|n| n.eq_ignore_ascii_case(s))) == Some(true)
        })
    }

    /// Library-default hyperparameters (the "without prior parameterization" point).
    pub fn default_params(self) -> ModelParams {
        match self {
            Family::Lda => ModelParams::Lda {
                solver: LdaSolver::Svd,
                shrinkage: Shrinkage::None,
            },
            Family::Qda => ModelParams::Qda {},
            Family::Knn => ModelParams::Knn { k: 5 },
            Family::Gnb => ModelParams::Gnb {},
            Family::DecisionTree => ModelParams::DecisionTree {
                splitter: Splitter::Best,
                criterion: Criterion::Gini,
                max_depth: None,
            },
            Family::AdaBoost => ModelParams::AdaBoost {
                estimators: 50,
                max_depth: 5,
            },
            Family::RandomForest => ModelParams::RandomForest {
                trees: 100,
                criterion: Criterion::Gini,
            },
            Family::ExtraTrees => ModelParams::ExtraTrees {
                trees: 100,
                criterion: Criterion::Gini,
            },
            Family::GradientBoosting => ModelParams::GradientBoosting {
                booster: Booster::Gbtree,
                learning_rate: 0.1,
                estimators: 100,
                max_depth: default_gb_depth(),
                lambda: default_lambda(),
                alpha: 0.0,
            },
            Family::Svc => ModelParams::Svc {
                kernel: Kernel::Rbf,
                c: 1.0,
                epochs: default_svc_epochs(),
                budget: default_svc_budget(),
            },
            Family::Mlp => ModelParams::Mlp {
                hidden: 100,
                activation: Activation::Relu,
                optimizer: Optimizer::Adam,
                learning_rate: default_mlp_lr(),
                max_epochs: default_mlp_epochs(),
            },
        }
    }

    /// The full hyperparameter grid for this family.
    pub fn grid(self) -> Vec<ModelParams> {
        let criteria = [Criterion::Gini, Criterion::Entropy];
        match self {
            Family::Lda => [LdaSolver::Svd, LdaSolver::Lsqr, LdaSolver::Eigen]
                .into_iter()
                .flat_map(|solver| {
                    [Shrinkage::Auto, Shrinkage::None]
                        .into_iter()
                        .map(move |shrinkage| ModelParams::Lda { solver, shrinkage })
                })
                .collect(),
            Family::Qda | Family::Gnb => vec![self.default_params()],
            Family::Knn => [1, 3, 5, 9].into_iter().map(|k| ModelParams::Knn { k }).collect(),
            Family::DecisionTree => [Splitter::Best, Splitter::Random]
                .into_iter()
                .flat_map(|splitter| {
                    criteria.into_iter().map(move |criterion| ModelParams::DecisionTree {
                        splitter,
                        criterion,
                        max_depth: None,
                    })
                })
                .collect(),
            Family::AdaBoost => [10, 50, 100, 500]
                .into_iter()
                .map(|estimators| ModelParams::AdaBoost {
                    estimators,
                    max_depth: 5,
                })
                .collect(),
            Family::RandomForest | Family::ExtraTrees => [10, 100, 500, 1000]
                .into_iter()
                .flat_map(|trees| {
                    criteria.into_iter().map(move |criterion| {
                        if self == Family::RandomForest {
                            ModelParams::RandomForest { trees, criterion }
                        } else {
                            ModelParams::ExtraTrees { trees, criterion }
                        }
                    })
                })
                .collect(),
            Family::GradientBoosting => [Booster::Gbtree, Booster::Gblinear]
                .into_iter()
                .flat_map(|booster| {
                    [1e-1, 1e-2, 1e-3, 1e-4].into_iter().flat_map(move |learning_rate| {
                        [10, 50, 100].into_iter().map(move |estimators| ModelParams::GradientBoosting {
                            booster,
                            learning_rate,
                            estimators,
                            max_depth: default_gb_depth(),
                            lambda: default_lambda(),
                            alpha: 0.0,
                        })
                    })
                })
                .collect(),
            Family::Svc => (2..=8)
                .map(|degree| Kernel::Poly { degree })
                .chain([Kernel::Rbf, Kernel::Sigmoid])
                .flat_map(|kernel| {
                    [0.1, 1.0, 10.0, 100.0].into_iter().map(move |c| ModelParams::Svc {
                        kernel,
                        c,
                        epochs: default_svc_epochs(),
                        budget: default_svc_budget(),
                    })
                })
                .collect(),
            Family::Mlp => [50, 100, 150, 200]
                .into_iter()
                .flat_map(|hidden| {
                    [Activation::Relu, Activation::Tanh, Activation::Logistic]
                        .into_iter()
                        .flat_map(move |activation| {
                            [Optimizer::Sgd, Optimizer::Adam].into_iter().map(move |optimizer| ModelParams::Mlp {
                                hidden,
                                activation,
                                optimizer,
                                learning_rate: default_mlp_lr(),
                                max_epochs: default_mlp_epochs(),
                            })
                        })
                })
                .collect(),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

fn default_gb_depth() -> usize {
    3
}
fn default_lambda() -> f64 {
    1.0
}
fn default_svc_epochs() -> usize {
    3
}
fn default_svc_budget() -> usize {
    256
}
fn default_mlp_lr() -> f64 {
    1e-3
}
fn default_mlp_epochs() -> usize {
    200
}

/// A family together with one hyperparameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum ModelParams {
    #[serde(rename = "LDA")]
    Lda { solver: LdaSolver, shrinkage: Shrinkage },
    #[serde(rename = "QDA")]
    Qda {},
    #[serde(rename = "KNN")]
    Knn { k: usize },
    #[serde(rename = "GNB")]
    Gnb {},
    #[serde(rename = "DT")]
    DecisionTree {
        splitter: Splitter,
        criterion: Criterion,
        #[serde(default)]
        max_depth: Option<usize>,
    },
    #[serde(rename = "AdaBoost")]
    AdaBoost { estimators: usize, max_depth: usize },
    #[serde(rename = "RF")]
    RandomForest { trees: usize, criterion: Criterion },
    #[serde(rename = "ET")]
    ExtraTrees { trees: usize, criterion: Criterion },
    #[serde(rename = "GB")]
    GradientBoosting {
        booster: Booster,
        learning_rate: f64,
        estimators: usize,
        #[serde(default = "default_gb_depth")]
        max_depth: usize,
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default)]
        alpha: f64,
    },
    #[serde(rename = "SVC")]
    Svc {
        kernel: Kernel,
        c: f64,
        #[serde(default = "default_svc_epochs")]
        epochs: usize,
        #[serde(default = "default_svc_budget")]
        budget: usize,
    },
    #[serde(rename = "MLP")]
    Mlp {
        hidden: usize,
        activation: Activation,
        optimizer: Optimizer,
        #[serde(default = "default_mlp_lr")]
        learning_rate: f64,
        #[serde(default = "default_mlp_epochs")]
        max_epochs: usize,
    },
}

impl ModelParams {
    pub fn family(&self) -> Family {
        match self {
            ModelParams::Lda { .. } => Family::Lda,
            ModelParams::Qda {} => Family::Qda,
            ModelParams::Knn { .. } => Family::Knn,
            ModelParams::Gnb {} => Family::Gnb,
            ModelParams::DecisionTree { .. } => Family::DecisionTree,
            ModelParams::AdaBoost { .. } => Family::AdaBoost,
            ModelParams::RandomForest { .. } => Family::RandomForest,
            ModelParams::ExtraTrees { .. } => Family::ExtraTrees,
            ModelParams::GradientBoosting { .. } => Family::GradientBoosting,
            ModelParams::Svc { .. } => Family::Svc,
            ModelParams::Mlp { .. } => Family::Mlp,
        }
    }

    /// Compact human-readable parameter listing.
    pub fn describe(&self) -> String {
        match self {
            ModelParams::Lda { solver, shrinkage } => format!("solver={solver:?} shrinkage={shrinkage:?}"),
            ModelParams::Qda {} | ModelParams::Gnb {} => "default".into(),
            ModelParams::Knn { k } => format!("k={k}"),
            ModelParams::DecisionTree {
                splitter,
                criterion,
                max_depth,
            } => format!("splitter={splitter:?} criterion={criterion:?} max_depth={max_depth:?}"),
            ModelParams::AdaBoost { estimators, max_depth } => format!("estimators={estimators} depth={max_depth}"),
            ModelParams::RandomForest { trees, criterion } | ModelParams::ExtraTrees { trees, criterion } => {
                format!("trees={trees} criterion={criterion:?}")
            }
            ModelParams::GradientBoosting {
                booster,
                learning_rate,
                estimators,
                ..
            } => format!("booster={booster:?} learning_rate={learning_rate} estimators={estimators}"),
            ModelParams::Svc { kernel, c, .. } => format!("kernel={kernel:?} C={c}"),
            ModelParams::Mlp {
                hidden,
                activation,
                optimizer,
                ..
            } => format!("hidden={hidden} activation={activation:?} optimizer={optimizer:?}"),
        }
        .to_lowercase()
    }
}

/// Hyperparameter point plus training seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub params: ModelParams,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(params: ModelParams, seed: u64) -> Self {
        Self { params, seed }
    }

    pub fn family(&self) -> Family {
        self.params.family()
    }
}

/// Fitted parameters of one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model")]
pub enum Fitted {
    /// Training data held a single class.
    Constant { class: u8 },
    Lda(discriminant::Lda),
    Qda(discriminant::Qda),
    Knn(knn::Knn),
    Gnb(naive_bayes::GaussianNb),
    Tree(tree::DecisionTree),
    AdaBoost(adaboost::AdaBoost),
    Forest(forest::Forest),
    Boosting(boosting::GradientBoosting),
    Svc(svc::Svc),
    Mlp(mlp::Mlp),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub family: Family,
    pub n_features: usize,
    /// (class 0, class 1) training priors.
    pub class_priors: [f64; 2],
    /// False when an iterative trainer hit its iteration cap.
    pub converged: bool,
    pub warnings: Vec<String>,
    pub fitted: Fitted,
}

impl TrainedModel {
    /// A model that always predicts `class` (score 1.0 or 0.0).
    pub fn constant(class: u8, n_features: usize) -> Self {
        let p1 = f64::from(class);
        Self {
            family: Family::DecisionTree,
            n_features,
            class_priors: [1.0 - p1, p1],
            converged: true,
            warnings: Vec::new(),
            fitted: Fitted::Constant { class },
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Positive-class score in [0, 1].
    pub fn predict_score(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.score_unchecked(x))
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.predict_score(x)? > 0.5))
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        let s = match &self.fitted {
            Fitted::Constant { class } => f64::from(*class),
            Fitted::Lda(m) => m.score(x),
            Fitted::Qda(m) => m.score(x),
            Fitted::Knn(m) => m.score(x),
            Fitted::Gnb(m) => m.score(x),
            Fitted::Tree(m) => m.score(x),
            Fitted::AdaBoost(m) => m.score(x),
            Fitted::Forest(m) => m.score(x),
            Fitted::Boosting(m) => m.score(x),
            Fitted::Svc(m) => m.score(x),
            Fitted::Mlp(m) => m.score(x),
        };
        if s.is_nan() {
            0.0
        } else {
            s.clamp(0.0, 1.0)
        }
    }

    /// Scores for every row of `x`.
    pub fn predict_scores(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                found: x.ncols(),
            });
        }
        let x = x.as_standard_layout();
        Ok((0..x.nrows())
            .into_par_iter()
            .with_min_len(64)
            .map(|i| self.score_unchecked(x.row(i).to_slice().expect("standard layout")))
            .collect())
    }

    pub fn predict_batch(&self, x: &Array2<f64>) -> Result<Vec<u8>> {
        Ok(self.predict_scores(x)?.into_iter().map(|s| u8::from(s > 0.5)).collect())
    }
}

/// Trains one model. KNN and DT accept single-class data and then predict
/// that class; every other family requires both classes.
pub fn train_model(spec: &ModelSpec, x: &Array2<f64>, y: &[u8]) -> Result<TrainedModel> {
    let (n, d) = x.dim();
    if y.len() != n {
        return Err(Error::invalid(format!("{} labels for {n} rows", y.len())));
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!("training needs at least 2 rows, got {n}")));
    }
    if y.iter().any(|&t| t > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    let pos = y.iter().filter(|&&t| t == 1).count();
    let p1 = pos as f64 / n as f64;
    let family = spec.family();
    let single = pos == 0 || pos == n;
    if single {
        return match family {
            Family::Knn | Family::DecisionTree => {
                let mut m = TrainedModel::constant(u8::from(pos == n), d);
                m.family = family;
                Ok(m)
            }
            _ => Err(Error::SingleClass),
        };
    }
    let x = x.as_standard_layout().to_owned();
    let mut converged = true;
    let mut warnings = Vec::new();
    let fitted = match spec.params {
        ModelParams::Lda { solver, shrinkage } => {
            let m = discriminant::Lda::fit(&x, y, solver, shrinkage)?;
            if m.jittered {
                warnings.push(format!("singular covariance: added {} ridge", discriminant::JITTER));
            }
            Fitted::Lda(m)
        }
        ModelParams::Qda {} => {
            let m = discriminant::Qda::fit(&x, y)?;
            if m.jittered {
                warnings.push(format!("singular covariance: added {} ridge", discriminant::JITTER));
            }
            Fitted::Qda(m)
        }
        ModelParams::Knn { k } => {
            if k == 0 {
                return Err(Error::invalid("KNN needs k >= 1"));
            }
            Fitted::Knn(knn::Knn::fit(&x, y, k))
        }
        ModelParams::Gnb {} => Fitted::Gnb(naive_bayes::GaussianNb::fit(&x, y)),
        ModelParams::DecisionTree {
            splitter,
            criterion,
            max_depth,
        } => {
            let params = tree::TreeParams {
                criterion,
                splitter,
                max_depth,
                ..Default::default()
            };
            let idx: Vec<usize> = (0..n).collect();
            let w = vec![1.0; n];
            Fitted::Tree(tree::DecisionTree::fit(&x, y, &w, &idx, &params, &mut rng_from_seed(spec.seed))?)
        }
        ModelParams::AdaBoost { estimators, max_depth } => {
            let m = adaboost::AdaBoost::fit(&x, y, estimators, max_depth, spec.seed)?;
            if m.stopped_early {
                warnings.push(format!("boosting stopped after {} rounds", m.learners.len()));
            }
            Fitted::AdaBoost(m)
        }
        ModelParams::RandomForest { trees, criterion } => Fitted::Forest(forest::Forest::fit(
            &x,
            y,
            forest::ForestKind::Random,
            trees,
            criterion,
            spec.seed,
        )?),
        ModelParams::ExtraTrees { trees, criterion } => Fitted::Forest(forest::Forest::fit(
            &x,
            y,
            forest::ForestKind::ExtraTrees,
            trees,
            criterion,
            spec.seed,
        )?),
        ModelParams::GradientBoosting {
            booster,
            learning_rate,
            estimators,
            max_depth,
            lambda,
            alpha,
        } => {
            if !(learning_rate > 0.0) {
                return Err(Error::invalid("learning_rate must be positive"));
            }
            let params = boosting::BoostParams {
                booster,
                learning_rate,
                estimators,
                max_depth,
                lambda,
                alpha,
            };
            Fitted::Boosting(boosting::GradientBoosting::fit(&x, y, &params))
        }
        ModelParams::Svc { kernel, c, epochs, budget } => {
            if !(c > 0.0) {
                return Err(Error::invalid("SVC C must be positive"));
            }
            let params = svc::SvcParams {
                kernel,
                c,
                epochs,
                budget,
            };
            Fitted::Svc(svc::Svc::fit(&x, y, &params, spec.seed))
        }
        ModelParams::Mlp {
            hidden,
            activation,
            optimizer,
            learning_rate,
            max_epochs,
        } => {
            let params = mlp::MlpParams {
                hidden,
                activation,
                optimizer,
                learning_rate,
                max_epochs,
                ..Default::default()
            };
            let m = mlp::Mlp::fit(&x, y, &params, spec.seed);
            if !m.converged {
                converged = false;
                warnings.push(format!("reached the {max_epochs}-epoch cap"));
            }
            Fitted::Mlp(m)
        }
    };
    Ok(TrainedModel {
        family,
        n_features: d,
        class_priors: [1.0 - p1, p1],
        converged,
        warnings,
        fitted,
    })
}

/// Member-tree predictions of a forest model, for vote inspection.
pub fn forest_member_predictions(model: &TrainedModel, x: &[f64]) -> Option<Vec<u8>> {
    match &model.fitted {
        Fitted::Forest(f) => Some(f.member_predictions(x)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util;
    use ndarray::array;

    fn blobs(seed: u64) -> (Array2<f64>, Vec<u8>) {
        use rand::Rng as _;
        let mut rng = rng_from_seed(seed);
        let n = 120;
        let x = Array2::from_shape_fn((n, 3), |(i, _)| {
            let c = if i % 3 == 0 { 1.2 } else { -0.6 };
            c + rng.random_range(-1.0..1.0)
        });
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0)).collect();
        (x, y)
    }

    #[test]
    fn grid_sizes_follow_the_declared_grids() {
        assert_eq!(Family::Lda.grid().len(), 6);
        assert_eq!(Family::Knn.grid().len(), 4);
        assert_eq!(Family::DecisionTree.grid().len(), 4);
        assert_eq!(Family::AdaBoost.grid().len(), 4);
        assert_eq!(Family::RandomForest.grid().len(), 8);
        assert_eq!(Family::ExtraTrees.grid().len(), 8);
        assert_eq!(Family::GradientBoosting.grid().len(), 24);
        assert_eq!(Family::Svc.grid().len(), 36);
        assert_eq!(Family::Mlp.grid().len(), 24);
        assert_eq!(Family::Qda.grid().len(), 1);
    }

    #[test]
    fn specs_round_trip_through_json() {
        for f in Family::ALL {
            for p in f.grid() {
                let s = ModelSpec::new(p, 9);
                let j = serde_json::to_string(&s).unwrap();
                let back: ModelSpec = serde_json::from_str(&j).unwrap();
                assert_eq!(back, s);
            }
        }
        assert_eq!(Family::parse("xgb"), Some(Family::GradientBoosting));
        assert_eq!(Family::parse("GB"), Some(Family::GradientBoosting));
        assert_eq!(Family::parse("AdaB"), Some(Family::AdaBoost));
    }

    #[test]
    fn knn_one_memorizes_training_set() {
        let (x, y) = blobs(1);
        let m = train_model(&ModelSpec::new(ModelParams::Knn { k: 1 }, 0), &x, &y).unwrap();
        assert_eq!(m.predict_batch(&x).unwrap(), y);
    }

    #[test]
    fn single_class_tolerated_only_by_knn_and_tree() {
        let x = array![[0.0], [1.0], [2.0]];
        let y = [1u8, 1, 1];
        for f in [Family::Knn, Family::DecisionTree] {
            let m = train_model(&ModelSpec::new(f.default_params(), 0), &x, &y).unwrap();
            assert_eq!(m.predict(&[5.0]).unwrap(), 1);
            assert_eq!(m.predict_score(&[5.0]).unwrap(), 1.0);
        }
        assert!(matches!(
            train_model(&ModelSpec::new(Family::Gnb.default_params(), 0), &x, &y),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let (x, y) = blobs(2);
        let m = train_model(&ModelSpec::new(Family::Gnb.default_params(), 0), &x, &y).unwrap();
        assert!(matches!(m.predict(&[1.0]), Err(Error::Dimension { expected: 3, found: 1 })));
    }

    #[test]
    fn every_family_trains_scores_in_range_and_is_deterministic() {
        let (x, y) = blobs(3);
        let probe = Array2::from_shape_fn((25, 3), |(i, j)| (i as f64 - 12.0) / 6.0 + j as f64 * 0.1);
        for f in Family::ALL {
            let mut p = f.default_params();
            // keep the expensive families small here
            match &mut p {
                ModelParams::RandomForest { trees, .. } | ModelParams::ExtraTrees { trees, .. } => *trees = 15,
                ModelParams::Mlp { hidden, max_epochs, .. } => {
                    *hidden = 8;
                    *max_epochs = 30;
                }
                _ => {}
            }
            let spec = ModelSpec::new(p, 17);
            let a = train_model(&spec, &x, &y).unwrap();
            let b = train_model(&spec, &x, &y).unwrap();
            let sa = a.predict_scores(&probe).unwrap();
            assert_eq!(sa, b.predict_scores(&probe).unwrap(), "{f:?} not deterministic");
            assert!(sa.iter().all(|s| (0.0..=1.0).contains(s)), "{f:?} score out of range");
            let train_acc = a.predict_batch(&x).unwrap().iter().zip(&y).filter(|(p, t)| p == t).count();
            assert!(train_acc > 80, "{f:?}: training accuracy {train_acc}/120");
        }
    }

    #[test]
    fn forest_prediction_is_member_majority() {
        let (x, y) = blobs(4);
        let spec = ModelSpec::new(
            ModelParams::RandomForest {
                trees: 7,
                criterion: Criterion::Entropy,
            },
            1,
        );
        let m = train_model(&spec, &x, &y).unwrap();
        for i in 0..x.nrows() {
            let xi = util::row(&x, i);
            let votes = forest_member_predictions(&m, xi).unwrap();
            let ones = votes.iter().filter(|&&v| v == 1).count();
            assert_eq!(m.predict(xi).unwrap(), u8::from(2 * ones > votes.len()));
        }
    }
}
