//! Score tables: CSV and aligned plain text with the columns
//! Method, mean balanced accuracy, Error (%) and, optionally, Features.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub method: String,
    pub mean: f64,
    pub error_pct: f64,
    pub features: Option<usize>,
    /// Marker shown after the method in text output (e.g. `*` for top picks).
    pub mark: String,
}

impl ScoreRow {
    pub fn new(method: impl Into<String>, mean: f64, error_pct: f64, features: Option<usize>) -> Self {
        Self {
            method: method.into(),
            mean,
            error_pct,
            features,
            mark: String::new(),
        }
    }
}

fn has_features(rows: &[ScoreRow]) -> bool {
    rows.iter().any(|r| r.features.is_some())
}

/// Four-decimal CSV with a header row.
pub fn score_table_csv(rows: &[ScoreRow]) -> String {
    let with_features = has_features(rows);
    let mut out = String::from("method,mean_balanced_accuracy,error_pct");
    if with_features {
        out.push_str(",features");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{:.4},{:.4}", r.method, r.mean, r.error_pct);
        if with_features {
            let _ = write!(out, ",{}", r.features.map(|k| k.to_string()).unwrap_or_default());
        }
        out.push('\n');
    }
    out
}

/// Aligned two-decimal table, e.g. `XGB-SMOTE_IPF   0.95   3.78   35`.
pub fn score_table_text(rows: &[ScoreRow]) -> String {
    let with_features = has_features(rows);
    let label = |r: &ScoreRow| format!("{}{}", r.method, r.mark);
    let width = rows.iter().map(|r| label(r).len()).max().unwrap_or(0).max("Method".len());
    let mut out = format!("{:<width$}  {:>8}  {:>9}", "Method", "Acc_b", "Error (%)");
    if with_features {
        out.push_str("  Features");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{:<width$}  {:>8.2}  {:>9.2}", label(r), r.mean, r.error_pct);
        if with_features {
            let _ = write!(out, "  {:>8}", r.features.map(|k| k.to_string()).unwrap_or_default());
        }
        out.push('\n');
    }
    out
}
