//! Imbalanced binary classification pipelines.

pub mod bundle;
pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod importance;
pub mod kmeans;
pub mod neighbors;
pub mod resampling;
pub mod statcompare;
pub mod util;

pub use error::{Error, Result};
