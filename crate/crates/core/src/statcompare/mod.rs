//! Friedman test over per-run pipeline ranks, Nemenyi post-hoc comparison
//! and critical-difference diagrams.

mod q_table;
mod svg;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

pub use q_table::MAX_PIPELINES;
pub use svg::render_cd_svg;

/// Scores (runs × pipelines) with per-run ranks; rank 1 is the best score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub labels: Vec<String>,
    pub scores: Array2<f64>,
    pub ranks: Array2<f64>,
}

impl RankTable {
    pub fn runs(&self) -> usize {
        self.scores.nrows()
    }

    pub fn pipelines(&self) -> usize {
        self.scores.ncols()
    }

    pub fn average_ranks(&self) -> Vec<f64> {
        (0..self.pipelines())
            .map(|j| self.ranks.column(j).sum() / self.runs() as f64)
            .collect()
    }
}

/// Ranks each run's scores, descending, with tied scores sharing their mean rank.
pub fn rank_pipelines(labels: Vec<String>, scores: Array2<f64>) -> Result<RankTable> {
    let (n, m) = scores.dim();
    if n < 2 || m < 2 {
        return Err(Error::invalid(format!("rank table needs >= 2 runs and >= 2 pipelines, got {n}x{m}")));
    }
    if labels.len() != m {
        return Err(Error::invalid(format!("{} labels for {m} pipelines", labels.len())));
    }
    if scores.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("NaN score in rank table"));
    }
    let mut ranks = Array2::zeros((n, m));
    for r in 0..n {
        let row = scores.row(r);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        let mut i = 0;
        while i < m {
            let mut j = i;
            while j + 1 < m && row[order[j + 1]] == row[order[i]] {
                j += 1;
            }
            // positions i..=j share ranks i+1..=j+1
            let shared = (i + j) as f64 / 2.0 + 1.0;
            for &p in &order[i..=j] {
                ranks[[r, p]] = shared;
            }
            i = j + 1;
        }
    }
    Ok(RankTable { labels, scores, ranks })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Friedman statistic 12n/(m(m+1)) · Σ_j (R̄_j − (m+1)/2)², with a
/// chi-square p-value on m − 1 degrees of freedom.
pub fn friedman_test(table: &RankTable) -> FriedmanResult {
    let (n, m) = (table.runs() as f64, table.pipelines());
    let mf = m as f64;
    let centre = (mf + 1.0) / 2.0;
    let ss: f64 = table.average_ranks().iter().map(|r| (r - centre).powi(2)).sum();
    let statistic = 12.0 * n / (mf * (mf + 1.0)) * ss;
    let df = m - 1;
    let p_value = if statistic <= 0.0 {
        1.0
    } else {
        let chi = ChiSquared::new(df as f64).expect("positive degrees of freedom");
        chi.sf(statistic)
    };
    FriedmanResult { statistic, df, p_value }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CdFormula {
    /// q·√(m(m−1)/(6n)), the radicand as printed in the source text.
    Paper,
    /// q·√(m(m+1)/(6n)), the usual Nemenyi form.
    Demsar,
}

impl CdFormula {
    pub fn name(self) -> &'static str {
        match self {
            CdFormula::Paper => "paper",
            CdFormula::Demsar => "demsar",
        }
    }
}

/// Nemenyi critical value for `m` pipelines.
pub fn q_alpha(m: usize, alpha: f64) -> Result<f64> {
    let table = if (alpha - 0.05).abs() < 1e-12 {
        &q_table::Q_05
    } else if (alpha - 0.10).abs() < 1e-12 {
        &q_table::Q_10
    } else {
        return Err(Error::invalid(format!("unsupported alpha {alpha}; use 0.05 or 0.10")));
    };
    if !(2..=MAX_PIPELINES).contains(&m) {
        return Err(Error::invalid(format!("q_alpha covers 2..={MAX_PIPELINES} pipelines, got {m}")));
    }
    Ok(table[m - 2])
}

pub fn critical_difference(m: usize, n: usize, alpha: f64, formula: CdFormula) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("critical difference needs n >= 1"));
    }
    let q = q_alpha(m, alpha)?;
    let mf = m as f64;
    let radicand = match formula {
        CdFormula::Paper => mf * (mf - 1.0),
        CdFormula::Demsar => mf * (mf + 1.0),
    };
    Ok(q * (radicand / (6.0 * n as f64)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NemenyiResult {
    pub labels: Vec<String>,
    pub average_ranks: Vec<f64>,
    /// Pipeline indices by ascending average rank (ties by index).
    pub order: Vec<usize>,
    pub alpha: f64,
    pub formula: CdFormula,
    pub q_alpha: f64,
    pub cd: f64,
    /// `significant[i][j]` when |R̄_i − R̄_j| ≥ CD.
    pub significant: Vec<Vec<bool>>,
}

pub fn nemenyi_compare(table: &RankTable, alpha: f64, formula: CdFormula) -> Result<NemenyiResult> {
    let m = table.pipelines();
    let cd = critical_difference(m, table.runs(), alpha, formula)?;
    let avg = table.average_ranks();
    let significant = (0..m)
        .map(|i| (0..m).map(|j| i != j && (avg[i] - avg[j]).abs() >= cd).collect())
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| avg[a].total_cmp(&avg[b]).then(a.cmp(&b)));
    Ok(NemenyiResult {
        labels: table.labels.clone(),
        average_ranks: avg,
        order,
        alpha,
        formula,
        q_alpha: q_alpha(m, alpha)?,
        cd,
        significant,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdTick {
    pub label: String,
    pub rank: f64,
}

/// Everything needed to draw a critical-difference diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdDiagram {
    pub axis_min: f64,
    pub axis_max: f64,
    /// Ticks by ascending average rank.
    pub ticks: Vec<CdTick>,
    pub cd: f64,
    pub formula: CdFormula,
    pub alpha: f64,
    /// Maximal runs of mutually non-significant pipelines (size ≥ 2), as
    /// `[first, last]` positions into `ticks`.
    pub groups: Vec<[usize; 2]>,
}

pub fn cd_diagram_data(result: &NemenyiResult) -> CdDiagram {
    let ticks: Vec<CdTick> = result
        .order
        .iter()
        .map(|&i| CdTick {
            label: result.labels[i].clone(),
            rank: result.average_ranks[i],
        })
        .collect();
    // for each start, extend while the span stays below CD; keep spans not
    // contained in the previous one
    let mut groups: Vec<[usize; 2]> = Vec::new();
    for start in 0..ticks.len() {
        let mut end = start;
        while end + 1 < ticks.len() && ticks[end + 1].rank - ticks[start].rank < result.cd {
            end += 1;
        }
        if end > start && groups.last().is_none_or(|g| end > g[1]) {
            groups.push([start, end]);
        }
    }
    CdDiagram {
        axis_min: 1.0,
        axis_max: result.labels.len() as f64,
        ticks,
        cd: result.cd,
        formula: result.formula,
        alpha: result.alpha,
        groups,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng as _;
    use statrs::distribution::{ContinuousCDF, Normal};

    use crate::util::rng_from_seed;

    fn labels(m: usize) -> Vec<String> {
        (0..m).map(|j| format!("p{j}")).collect()
    }

    fn table(rows: &[&[f64]]) -> RankTable {
        let m = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        rank_pipelines(labels(m), Array2::from_shape_vec((rows.len(), m), flat).unwrap()).unwrap()
    }

    #[test]
    fn ranks_and_ties() {
        let t = table(&[&[0.9, 0.8, 0.7], &[0.9, 0.9, 0.7]]);
        assert_eq!(t.ranks.row(0).to_vec(), vec![1.0, 2.0, 3.0]);
        assert_eq!(t.ranks.row(1).to_vec(), vec![1.5, 1.5, 3.0]);
        assert!(rank_pipelines(labels(2), Array2::from_elem((2, 2), f64::NAN)).is_err());
    }

    #[test]
    fn friedman_on_a_fixed_ordering() {
        let row: &[f64] = &[0.9, 0.8, 0.7];
        let t = table(&[row, row, row, row]);
        let f = friedman_test(&t);
        assert!((f.statistic - 8.0).abs() < 1e-12);
        assert_eq!(f.df, 2);
        // chi-square(2) survival is exp(-x/2)
        assert!((f.p_value - (-4.0f64).exp()).abs() < 1e-9);
        let flat = table(&[&[0.5, 0.5, 0.5], &[0.5, 0.5, 0.5]]);
        let f = friedman_test(&flat);
        assert_eq!((f.statistic, f.p_value), (0.0, 1.0));
    }

    #[test]
    fn q_table_matches_independent_quantiles() {
        // m = 2: the range of two normals is √2·|Z|, so q/√2 is the two-sided normal quantile
        let normal = Normal::new(0.0, 1.0).unwrap();
        assert!((q_alpha(2, 0.05).unwrap() - normal.inverse_cdf(0.975)).abs() < 1e-5);
        assert!((q_alpha(2, 0.10).unwrap() - normal.inverse_cdf(0.95)).abs() < 1e-5);
        assert!((q_alpha(2, 0.05).unwrap() - 1.960).abs() < 1e-3);
        // m > 2: trapezoid integration of the range CDF at the tabulated point
        for (m, alpha) in [(3, 0.05), (10, 0.05), (33, 0.05), (50, 0.10)] {
            let q = q_alpha(m, alpha).unwrap() * std::f64::consts::SQRT_2;
            let h = 1e-3;
            let cdf: f64 = (0..20_000)
                .map(|i| {
                    let z = -10.0 + (i as f64 + 0.5) * h;
                    let inner = normal.cdf(z) - normal.cdf(z - q);
                    (-z * z / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt() * inner.powi(m as i32 - 1)
                })
                .sum::<f64>()
                * h
                * m as f64;
            assert!((cdf - (1.0 - alpha)).abs() < 1e-5, "m={m}: {cdf}");
        }
        assert!(q_alpha(51, 0.05).is_err());
        assert!(q_alpha(3, 0.01).is_err());
    }

    #[test]
    fn critical_difference_examples() {
        let q = q_alpha(2, 0.05).unwrap();
        let paper = critical_difference(2, 10, 0.05, CdFormula::Paper).unwrap();
        let demsar = critical_difference(2, 10, 0.05, CdFormula::Demsar).unwrap();
        assert!((paper - q * (2.0f64 / 60.0).sqrt()).abs() < 1e-12);
        assert!((demsar - q * (6.0f64 / 60.0).sqrt()).abs() < 1e-12);
        assert!((paper - 0.3578).abs() < 5e-5);
        assert!((demsar - 0.6198).abs() < 5e-5);
        for formula in [CdFormula::Paper, CdFormula::Demsar] {
            let cds: Vec<f64> = (2..=50).map(|m| critical_difference(m, 10, 0.05, formula).unwrap()).collect();
            assert!(cds.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn identical_pipelines_are_not_significant() {
        let t = table(&[&[0.7, 0.7, 0.1], &[0.8, 0.8, 0.2], &[0.6, 0.6, 0.3]]);
        let r = nemenyi_compare(&t, 0.05, CdFormula::Demsar).unwrap();
        assert!(!r.significant[0][1]);
        let d = cd_diagram_data(&r);
        assert_eq!(d.ticks.iter().map(|t| t.rank).collect::<Vec<_>>(), vec![1.5, 1.5, 3.0]);
    }

    #[test]
    fn best_pipeline_heads_the_order() {
        // 33 pipelines, 10 runs; pipeline 17 is best in every run
        let mut rng = rng_from_seed(3);
        let scores = Array2::from_shape_fn((10, 33), |(_, j)| {
            if j == 17 {
                0.99
            } else {
                rng.random_range(0.5..0.95)
            }
        });
        let t = rank_pipelines(labels(33), scores).unwrap();
        let r = nemenyi_compare(&t, 0.05, CdFormula::Demsar).unwrap();
        assert_eq!(r.order[0], 17);
        assert_eq!(r.average_ranks[17], 1.0);
    }

    #[test]
    fn groups_follow_rank_clusters() {
        let all_close = table(&[&[0.9, 0.8, 0.7], &[0.7, 0.9, 0.8], &[0.8, 0.7, 0.9]]);
        let r = nemenyi_compare(&all_close, 0.05, CdFormula::Demsar).unwrap();
        assert_eq!(cd_diagram_data(&r).groups, vec![[0, 2]]);
        // two clusters of three whose average ranks differ by 3 > CD (n=40)
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|r| {
                let mut v = vec![0.9, 0.91, 0.92, 0.1, 0.11, 0.12];
                v[..3].rotate_left(r % 3);
                v[3..].rotate_left(r % 3);
                v
            })
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let r = nemenyi_compare(&table(&refs), 0.05, CdFormula::Demsar).unwrap();
        assert!(r.cd < 3.0);
        assert_eq!(cd_diagram_data(&r).groups, vec![[0, 2], [3, 5]]);
    }

    #[test]
    fn friedman_tracks_a_permutation_null() {
        let mut rng = rng_from_seed(12);
        let (n, m) = (4, 6);
        let scores = Array2::from_shape_fn((n, m), |(_, j)| rng.random::<f64>() + 0.12 * j as f64);
        let t = rank_pipelines(labels(m), scores).unwrap();
        let observed = friedman_test(&t);
        let mut ranks = t.ranks.clone();
        let mut hits = 0;
        let draws = 20_000;
        for _ in 0..draws {
            for mut row in ranks.rows_mut() {
                let mut v = row.to_vec();
                v.shuffle(&mut rng);
                row.assign(&ndarray::Array1::from(v));
            }
            let permuted = RankTable {
                ranks: ranks.clone(),
                ..t.clone()
            };
            if friedman_test(&permuted).statistic >= observed.statistic - 1e-12 {
                hits += 1;
            }
        }
        let p_mc = hits as f64 / draws as f64;
        assert!((p_mc - observed.p_value).abs() < 0.03, "{p_mc} vs {}", observed.p_value);
    }

    proptest! {
        #[test]
        fn rank_rows_sum_to_triangle(rows in prop::collection::vec(prop::collection::vec(0u8..5, 5), 2..6)) {
            let n = rows.len();
            let flat: Vec<f64> = rows.iter().flatten().map(|&v| f64::from(v)).collect();
            let t = rank_pipelines(labels(5), Array2::from_shape_vec((n, 5), flat).unwrap()).unwrap();
            for r in t.ranks.rows() {
                prop_assert!((r.sum() - 15.0).abs() < 1e-12);
            }
        }

        #[test]
        fn monotone_transforms_change_nothing(seed in any::<u64>(), shift in -3.0f64..3.0) {
            let mut rng = rng_from_seed(seed);
            let scores = Array2::from_shape_fn((5, 4), |_| rng.random_range(0.0..1.0));
            let a = rank_pipelines(labels(4), scores.clone()).unwrap();
            let b = rank_pipelines(labels(4), scores.mapv(|v| (v * 3.0).exp() + shift)).unwrap();
            prop_assert_eq!(&a.ranks, &b.ranks);
            prop_assert_eq!(friedman_test(&a), friedman_test(&b));
            let ra = nemenyi_compare(&a, 0.05, CdFormula::Demsar).unwrap();
            let rb = nemenyi_compare(&b, 0.05, CdFormula::Demsar).unwrap();
            prop_assert_eq!(ra.significant.clone(), rb.significant);
            for i in 0..4 {
                prop_assert!(!ra.significant[i][i]);
                for j in 0..4 {
                    prop_assert_eq!(ra.significant[i][j], ra.significant[j][i]);
                }
            }
        }
    }
}
