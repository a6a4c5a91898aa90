//! Permutation feature importance on cross-validation folds, with a 1-D
//! k-means split into high/mid/low bands.

use std::fmt::Write as _;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::{balanced_accuracy, confusion, CvContext, CvOptions, CvPlan, FoldArtifacts, Pipeline};
use crate::kmeans::{kmeans_fit_with, KMeansOptions};
use crate::util::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    High,
    Mid,
    Low,
}

impl Band {
    pub fn name(self) -> &'static str {
        match self {
            Band::High => "high",
            Band::Mid => "mid",
            Band::Low => "low",
        }
    }

    /// Fill colour in the bar chart.
    pub fn colour(self) -> &'static str {
        match self {
            Band::High => "#f28e2b",
            Band::Mid => "#4e79a7",
            Band::Low => "#e15759",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    /// Mean drop in balanced accuracy (may be negative).
    pub raw: f64,
    /// Share of the total after flooring negatives at zero.
    pub percent: f64,
    pub band: Option<Band>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub pipeline: String,
    pub folds: usize,
    pub folds_used: usize,
    pub permutations: usize,
    pub seed: u64,
    pub baseline: f64,
    pub features: Vec<FeatureImportance>,
    pub warnings: Vec<String>,
}

/// Mean over `permutations` shuffles of column `col` of the baseline drop.
fn permuted_drop(art: &FoldArtifacts, baseline: f64, col: usize, permutations: usize, seed: u64) -> Result<f64> {
    let mut rng = rng_from_seed(seed);
    let mut x: Array2<f64> = art.test_x.clone();
    let original: Vec<f64> = x.column(col).to_vec();
    let mut shuffled = original.clone();
    let mut total = 0.0;
    for _ in 0..permutations {
        shuffled.shuffle(&mut rng);
        x.column_mut(col).assign(&ndarray::ArrayView1::from(&shuffled));
        let pred = art.model.predict_batch(&x)?;
        total += baseline - balanced_accuracy(&confusion(&art.test_y, &pred)?)?;
    }
    Ok(total / permutations as f64)
}

/// Permutation importance of every feature of `ctx`'s dataset under
/// `pipeline`: per fold, train on the training split, then shuffle one
/// validation column at a time. Features the pipeline did not select on a
/// fold contribute zero for that fold.
pub fn permutation_importance_in(
    ctx: &CvContext<'_>,
    pipeline: &Pipeline,
    permutations: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if permutations == 0 {
        return Err(Error::invalid("permutations must be >= 1"));
    }
    let d = ctx.data().n_features();
    let k = ctx.folds().len();
    let fitted: Vec<Result<(FoldArtifacts, f64)>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let art = ctx.fit_fold(pipeline, f)?;
            let base = art.score()?;
            Ok((art, base))
        })
        .collect();
    let mut warnings = Vec::new();
    let mut folds = Vec::new();
    for (f, r) in fitted.into_iter().enumerate() {
        match r {
            Ok(v) => folds.push((f, v)),
            Err(e) => {
                let msg = format!("importance fold {f} skipped: {e}");
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }
    if folds.is_empty() {
        return Err(Error::AllFailed);
    }
    let jobs: Vec<(usize, usize)> = (0..folds.len()).flat_map(|i| (0..d).map(move |j| (i, j))).collect();
    let drops: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let (f, (art, base)) = &folds[i];
            match art.columns.iter().position(|&c| c == j) {
                Some(col) => permuted_drop(art, *base, col, permutations, derive_seed(derive_seed(seed, *f as u64), j as u64)),
                None => Ok(0.0),
            }
        })
        .collect::<Result<_>>()?;
    let used = folds.len() as f64;
    let raw: Vec<f64> = (0..d)
        .map(|j| (0..folds.len()).map(|i| drops[i * d + j]).sum::<f64>() / used)
        .collect();
    let floored: Vec<f64> = raw.iter().map(|r| r.max(0.0)).collect();
    let total: f64 = floored.iter().sum();
    if total == 0.0 {
        warnings.push("no feature lowered the score; all percentages are 0".into());
    }
    let features = ctx
        .data()
        .feature_names()
        .iter()
        .zip(raw.iter().zip(&floored))
        .map(|(name, (&r, &fl))| FeatureImportance {
            name: name.clone(),
            raw: r,
            percent: if total > 0.0 { 100.0 * fl / total } else { 0.0 },
            band: None,
        })
        .collect();
    Ok(ImportanceReport {
        pipeline: pipeline.id(d),
        folds: k,
        folds_used: folds.len(),
        permutations,
        seed,
        baseline: folds.iter().map(|(_, (_, b))| b).sum::<f64>() / used,
        features,
        warnings,
    })
}

/// [`permutation_importance_in`] on fresh folds of `data`.
pub fn permutation_importance(
    pipeline: &Pipeline,
    data: &Dataset,
    plan: &CvPlan,
    permutations: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    let ctx = CvContext::new(data, *plan, CvOptions::default())?;
    permutation_importance_in(&ctx, pipeline, permutations, seed)
}

/// Bands features by 1-D k-means on their percentages. Clusters are named
/// by descending centroid: high, mid, low. With fewer distinct values than
/// `k`, k shrinks to the distinct count (two clusters are high/low, one
/// cluster is high).
pub fn group_importances(mut report: ImportanceReport, k: usize, seed: u64) -> Result<ImportanceReport> {
    let d = report.features.len();
    if k == 0 || k > 3 || k > d {
        return Err(Error::invalid(format!("cannot form {k} groups from {d} features")));
    }
    let values: Vec<f64> = report.features.iter().map(|f| f.percent).collect();
    let mut distinct = values.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let k = k.min(distinct.len());
    let points = Array2::from_shape_vec((d, 1), values).expect("d x 1");
    let options = KMeansOptions {
        n_init: 10,
        ..Default::default()
    };
    let model = kmeans_fit_with(&points, k, seed, options)?;
    let mut by_centroid: Vec<usize> = (0..k).collect();
    by_centroid.sort_by(|&a, &b| model.centroids[[b, 0]].total_cmp(&model.centroids[[a, 0]]));
    let names: &[Band] = match k {
        1 => &[Band::High],
        2 => &[Band::High, Band::Low],
        _ => &[Band::High, Band::Mid, Band::Low],
    };
    for (i, f) in report.features.iter_mut().enumerate() {
        let pos = by_centroid.iter().position(|&c| c == model.assignments[i]).expect("assigned");
        f.band = Some(names[pos]);
    }
    Ok(report)
}

impl ImportanceReport {
    /// Feature indices by descending percentage, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.features.len()).collect();
        idx.sort_by(|&a, &b| self.features[b].percent.total_cmp(&self.features[a].percent).then(a.cmp(&b)));
        idx
    }

    /// `feature,percent,raw,group`, by descending percentage.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,percent,raw,group\n");
        for i in self.ranking() {
            let f = &self.features[i];
            let _ = writeln!(
                out,
                "{},{:.4},{:.6},{}",
                f.name,
                f.percent,
                f.raw,
                f.band.map(Band::name).unwrap_or("")
            );
        }
        out
    }

    /// Horizontal bar chart, largest first, coloured by band.
    pub fn to_svg(&self) -> String {
        let order = self.ranking();
        let (bar_h, gap, left, width) = (16.0, 6.0, 200.0, 760.0);
        let height = 40.0 + order.len() as f64 * (bar_h + gap);
        let max = self.features.iter().map(|f| f.percent).fold(0.0, f64::max).max(1e-12);
        let span = width - left - 70.0;
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height:.0}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<text x=\"{left}\" y=\"18\">Permutation importance (%) - {}</text>\n",
            self.pipeline
        );
        for (row, &i) in order.iter().enumerate() {
            let f = &self.features[i];
            let y = 30.0 + row as f64 * (bar_h + gap);
            let w = f.percent / max * span;
            let colour = f.band.map(Band::colour).unwrap_or("#999999");
            let _ = writeln!(
                s,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
                left - 6.0,
                y + bar_h - 4.0,
                f.name.replace('&', "&amp;").replace('<', "&lt;")
            );
            let _ = writeln!(s, "<rect x=\"{left}\" y=\"{y:.1}\" width=\"{w:.2}\" height=\"{bar_h}\" fill=\"{colour}\"/>");
            let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\">{:.2}</text>", left + w + 4.0, y + bar_h - 4.0, f.percent);
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{Criterion, ModelParams, ModelSpec, Splitter};
    use crate::evaluation::FeatureSubset;
    use crate::resampling::{ResamplerKind, ResamplerSpec};
    use rand::Rng as _;

    fn report_with(values: &[f64]) -> ImportanceReport {
        ImportanceReport {
            pipeline: "t".into(),
            folds: 1,
            folds_used: 1,
            permutations: 1,
            seed: 0,
            baseline: 1.0,
            features: values
                .iter()
                .enumerate()
                .map(|(i, &v)| FeatureImportance {
                    name: format!("f{i}"),
                    raw: v,
                    percent: v,
                    band: None,
                })
                .collect(),
            warnings: vec![],
        }
    }

    fn fixture(n: usize, seed: u64, informative_label: bool) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let x = Array2::from_shape_fn((n, 2), |(i, j)| {
            if j == 0 && informative_label {
                f64::from(y[i])
            } else {
                rng.random::<f64>()
            }
        });
        Dataset::from_target(x, vec!["signal".into(), "noise".into()], y.into()).unwrap()
    }

    fn stump() -> Pipeline {
        Pipeline::new(
            ResamplerSpec::new(ResamplerKind::None, 0),
            ModelSpec::new(
                ModelParams::DecisionTree {
                    splitter: Splitter::Best,
                    criterion: Criterion::Gini,
                    max_depth: Some(1),
                },
                0,
            ),
            FeatureSubset::All,
        )
    }

    #[test]
    fn ignored_feature_scores_exactly_zero() {
        let data = fixture(200, 1, true);
        let plan = CvPlan {
            folds: 5,
            ..Default::default()
        };
        let r = permutation_importance(&stump(), &data, &plan, 10, 3).unwrap();
        assert_eq!(r.features[1].raw, 0.0);
        assert_eq!(r.features[1].percent, 0.0);
        assert!((r.features[0].percent - 100.0).abs() < 1e-9);
    }

    #[test]
    fn label_copy_loses_half_its_accuracy_when_shuffled() {
        let data = fixture(400, 2, true);
        let plan = CvPlan {
            folds: 5,
            ..Default::default()
        };
        let r = permutation_importance(&stump(), &data, &plan, 200, 4).unwrap();
        assert_eq!(r.baseline, 1.0);
        // a shuffled copy of the label agrees by chance: expected score 0.5
        assert!((r.features[0].raw - 0.5).abs() < 0.02, "{}", r.features[0].raw);
    }

    #[test]
    fn percentages_sum_to_one_hundred() {
        let data = crate::resampling::testutil::blobs(300, 60, 5, 1.0, 3);
        let p = Pipeline::new(
            ResamplerSpec::new(ResamplerKind::Smote, 0),
            ModelSpec::new(ModelParams::Gnb {}, 0),
            FeatureSubset::All,
        );
        let r = permutation_importance(&p, &data, &CvPlan { folds: 5, ..Default::default() }, 5, 1).unwrap();
        let total: f64 = r.features.iter().map(|f| f.percent).sum();
        assert!((total - 100.0).abs() < 1e-6);
        assert!(r.features.iter().all(|f| f.percent >= 0.0));
        let again = permutation_importance(&p, &data, &CvPlan { folds: 5, ..Default::default() }, 5, 1).unwrap();
        assert_eq!(r, again);
    }

    /// Best contiguous 3-partition of sorted values by within-cluster SSE.
    fn exhaustive_partition(sorted: &[f64]) -> (usize, usize) {
        let sse = |s: &[f64]| {
            let m = s.iter().sum::<f64>() / s.len() as f64;
            s.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        };
        let n = sorted.len();
        let mut best = (f64::INFINITY, 0, 0);
        for a in 1..n - 1 {
            for b in a + 1..n {
                let cost = sse(&sorted[..a]) + sse(&sorted[a..b]) + sse(&sorted[b..]);
                if cost < best.0 {
                    best = (cost, a, b);
                }
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn bands_follow_the_optimal_partition() {
        let values = [50.0, 45.0, 3.0, 2.0, 0.5];
        let r = group_importances(report_with(&values), 3, 0).unwrap();
        let mut ascending = values.to_vec();
        ascending.reverse();
        let (a, b) = exhaustive_partition(&ascending);
        // ascending positions [b..] are high, [a..b] mid, [..a] low
        for (pos, v) in ascending.iter().enumerate() {
            let expected = if pos >= b {
                Band::High
            } else if pos >= a {
                Band::Mid
            } else {
                Band::Low
            };
            let f = r.features.iter().find(|f| f.percent == *v).unwrap();
            assert_eq!(f.band, Some(expected), "{v}");
        }
    }

    #[test]
    fn identical_importances_share_one_band() {
        let r = group_importances(report_with(&[10.0, 10.0, 10.0]), 3, 0).unwrap();
        assert!(r.features.iter().all(|f| f.band == Some(Band::High)));
        assert!(group_importances(report_with(&[1.0, 2.0]), 3, 0).is_err());
    }

    #[test]
    fn csv_and_svg_list_every_feature() {
        let r = group_importances(report_with(&[5.0, 80.0, 15.0]), 3, 0).unwrap();
        let csv = r.to_csv();
        assert_eq!(csv.lines().nth(1).unwrap(), "f1,80.0000,80.000000,high");
        let svg = r.to_svg();
        assert_eq!(svg.matches("<rect x=").count(), 3);
        assert!(svg.contains(Band::High.colour()) && svg.contains(Band::Low.colour()));
    }
}
