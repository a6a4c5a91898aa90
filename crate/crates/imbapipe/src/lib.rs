//! Experiment driver and prediction service for imbalanced classification
//! pipelines built on `imbapipe-core`.

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod service;
pub mod stages;
