//! SMOTE, ADASYN and ProWSyn. All three interpolate between a minority row
//! and one of its nearest minority neighbors; they differ in how many
//! samples each minority row seeds.

use ndarray::Array2;
use rand::Rng as _;

use super::{append_rows, split_classes, ResampledSet, ResamplerSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::neighbors::{knn_among, knn_table};
use crate::util::{self, largest_remainder, rng_from_seed, Rng};

/// Neighbor count clamped to what the minority class can supply.
fn effective_k(k: usize, minority: usize) -> usize {
    k.min(minority - 1).max(1)
}

fn require_two(minority: usize) -> Result<()> {
    if minority < 2 {
        return Err(Error::InsufficientData(format!(
            "oversampling needs at least 2 minority rows, found {minority}"
        )));
    }
    Ok(())
}

/// Nearest-neighbor lists keyed by row index of the full matrix.
struct NeighborMap {
    rows: Vec<usize>,
    lists: Vec<Vec<usize>>,
}

impl NeighborMap {
    fn build(x: &Array2<f64>, queries: &[usize], candidates: &[usize], k: usize) -> Self {
        Self {
            rows: queries.to_vec(),
            lists: knn_table(x, queries, candidates, k),
        }
    }

    fn of(&self, row: usize) -> &[usize] {
        let pos = self.rows.binary_search(&row).expect("row has a neighbor list");
        &self.lists[pos]
    }
}

fn interpolate(x: &Array2<f64>, base: usize, other: usize, gap: f64) -> Vec<f64> {
    util::row(x, base)
        .iter()
        .zip(util::row(x, other))
        .map(|(a, b)| a + gap * (b - a))
        .collect()
}

/// `count` samples from bases drawn uniformly out of `bases`.
fn generate_uniform(
    x: &Array2<f64>,
    bases: &[usize],
    neighbors: &NeighborMap,
    count: usize,
    rng: &mut Rng,
    rows: &mut Vec<Vec<f64>>,
    sources: &mut Vec<usize>,
) {
    for _ in 0..count {
        let base = bases[rng.random_range(0..bases.len())];
        push_sample(x, base, neighbors, rng, rows, sources);
    }
}

fn push_sample(
    x: &Array2<f64>,
    base: usize,
    neighbors: &NeighborMap,
    rng: &mut Rng,
    rows: &mut Vec<Vec<f64>>,
    sources: &mut Vec<usize>,
) {
    let list = neighbors.of(base);
    let other = list[rng.random_range(0..list.len())];
    let gap: f64 = rng.random();
    rows.push(interpolate(x, base, other, gap));
    sources.push(base);
}

/// SMOTE. `n_synthetic` defaults to the class-count difference.
pub fn smote_oversample(data: &Dataset, spec: &ResamplerSpec, n_synthetic: Option<usize>) -> Result<ResampledSet> {
    let split = split_classes(data)?;
    require_two(split.minority.len())?;
    let count = n_synthetic.unwrap_or(split.majority.len() - split.minority.len());
    let x = data.features();
    let k = effective_k(spec.k_neighbors, split.minority.len());
    let neighbors = NeighborMap::build(x, &split.minority, &split.minority, k);
    let mut rng = rng_from_seed(spec.seed);
    let (mut rows, mut sources) = (Vec::with_capacity(count), Vec::with_capacity(count));
    generate_uniform(x, &split.minority, &neighbors, count, &mut rng, &mut rows, &mut sources);
    append_rows(data, rows, &sources, split.minority_label)
}

/// Normalized ADASYN weights, one per minority row (ascending row order):
/// the share of majority rows among each row's k nearest neighbors overall.
/// Returns `None` when every raw weight is zero.
pub fn adasyn_weights(data: &Dataset, k_neighbors: usize) -> Result<Option<Vec<f64>>> {
    let split = split_classes(data)?;
    let x = data.features();
    let y = data.require_target()?;
    let all: Vec<usize> = (0..data.n_rows()).collect();
    let k = k_neighbors.min(data.n_rows() - 1).max(1);
    let lists = knn_table(x, &split.minority, &all, k);
    let raw: Vec<f64> = lists
        .iter()
        .map(|l| l.iter().filter(|&&j| y[j] != split.minority_label).count() as f64 / k as f64)
        .collect();
    let sum: f64 = raw.iter().sum();
    if sum <= 0.0 {
        return Ok(None);
    }
    Ok(Some(raw.iter().map(|r| r / sum).collect()))
}

/// ADASYN: SMOTE with per-row counts proportional to local majority density.
pub fn adasyn_oversample(data: &Dataset, spec: &ResamplerSpec) -> Result<ResampledSet> {
    let split = split_classes(data)?;
    require_two(split.minority.len())?;
    let Some(weights) = adasyn_weights(data, spec.k_neighbors)? else {
        let msg = "ADASYN: no minority row has majority neighbors; using uniform SMOTE allocation";
        log::warn!("{msg}");
        let mut out = smote_oversample(data, spec, None)?;
        out.warnings.push(msg.to_string());
        return Ok(out);
    };
    let count = split.majority.len() - split.minority.len();
    let allocation = largest_remainder(&weights, count);
    let x = data.features();
    let k = effective_k(spec.k_neighbors, split.minority.len());
    let neighbors = NeighborMap::build(x, &split.minority, &split.minority, k);
    let mut rng = rng_from_seed(spec.seed);
    let (mut rows, mut sources) = (Vec::with_capacity(count), Vec::with_capacity(count));
    for (&base, &c) in split.minority.iter().zip(&allocation) {
        for _ in 0..c {
            push_sample(x, base, &neighbors, &mut rng, &mut rows, &mut sources);
        }
    }
    append_rows(data, rows, &sources, split.minority_label)
}

/// ProWSyn proximity levels (row indices, ascending within each level).
///
/// Level ℓ < L collects the minority rows that appear among the k nearest
/// remaining minority rows of any majority row; those rows are then removed.
/// Level L takes whatever remains. Empty levels are dropped.
pub fn prowsyn_levels(data: &Dataset, k_neighbors: usize, levels: usize) -> Result<Vec<Vec<usize>>> {
    let split = split_classes(data)?;
    let x = data.features();
    let k = effective_k(k_neighbors, split.minority.len().max(2));
    let mut remaining = split.minority.clone();
    let mut out = Vec::new();
    for _ in 1..levels {
        if remaining.is_empty() {
            break;
        }
        let mut hit = vec![false; remaining.len()];
        for &p in &split.majority {
            for (j, _) in knn_among(x, &remaining, util::row(x, p), k, None) {
                let pos = remaining.binary_search(&j).expect("neighbor from remaining");
                hit[pos] = true;
            }
        }
        let (level, rest): (Vec<(usize, bool)>, Vec<(usize, bool)>) =
            remaining.iter().copied().zip(hit).partition(|(_, h)| *h);
        out.push(level.into_iter().map(|(i, _)| i).collect());
        remaining = rest.into_iter().map(|(i, _)| i).collect();
    }
    if !remaining.is_empty() {
        out.push(remaining);
    }
    Ok(out)
}

/// ProWSyn: levels nearer the majority class receive exponentially more
/// synthetic samples; neighbors are drawn from the same level.
pub fn prowsyn_oversample(data: &Dataset, spec: &ResamplerSpec) -> Result<ResampledSet> {
    let split = split_classes(data)?;
    require_two(split.minority.len())?;
    let levels = prowsyn_levels(data, spec.k_neighbors, spec.levels)?;
    let weights: Vec<f64> = (0..levels.len()).map(|l| (-spec.theta * l as f64).exp()).collect();
    let count = split.majority.len() - split.minority.len();
    let allocation = largest_remainder(&weights, count);
    let x = data.features();
    let mut rng = rng_from_seed(spec.seed);
    let (mut rows, mut sources) = (Vec::with_capacity(count), Vec::with_capacity(count));
    for (level, &c) in levels.iter().zip(&allocation) {
        // a singleton level has no same-level partner; fall back to the whole minority
        let pool = if level.len() >= 2 { level } else { &split.minority };
        let k = effective_k(spec.k_neighbors, pool.len());
        let neighbors = NeighborMap::build(x, level, pool, k);
        generate_uniform(x, level, &neighbors, c, &mut rng, &mut rows, &mut sources);
    }
    append_rows(data, rows, &sources, split.minority_label)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{blobs, on_some_segment};
    use super::super::ResamplerKind;
    use super::*;
    use proptest::prelude::*;

    fn tiny(points: &[(f64, f64, u8)]) -> Dataset {
        let x = Array2::from_shape_fn((points.len(), 2), |(i, j)| if j == 0 { points[i].0 } else { points[i].1 });
        let y = points.iter().map(|p| p.2).collect();
        Dataset::from_target(x, vec!["a".into(), "b".into()], y).unwrap()
    }

    fn one_d(values: &[(f64, u8)]) -> Dataset {
        let x = Array2::from_shape_fn((values.len(), 1), |(i, _)| values[i].0);
        let y = values.iter().map(|v| v.1).collect();
        Dataset::from_target(x, vec!["v".into()], y).unwrap()
    }

    #[test]
    fn two_point_minority_stays_on_its_segment() {
        let data = tiny(&[(0.0, 0.0, 1), (2.0, 2.0, 1), (5.0, 0.0, 0), (6.0, 0.0, 0), (7.0, 0.0, 0), (8.0, 1.0, 0)]);
        let spec = ResamplerSpec {
            k_neighbors: 1,
            ..ResamplerSpec::new(ResamplerKind::Smote, 3)
        };
        let out = smote_oversample(&data, &spec, Some(50)).unwrap();
        let x = out.data.features();
        for i in 6..out.data.n_rows() {
            let s = util::row(x, i);
            // collinear with (0,0)-(2,2) and inside the box
            assert!((s[0] - s[1]).abs() < 1e-9);
            assert!((0.0..=2.0).contains(&s[0]));
        }
    }

    #[test]
    fn midpoint_interpolation() {
        let x = Array2::from_shape_vec((2, 2), vec![0.0, 0.0, 2.0, 2.0]).unwrap();
        assert_eq!(interpolate(&x, 0, 1, 0.5), vec![1.0, 1.0]);
    }

    #[test]
    fn originals_are_kept_and_synthetics_are_minority() {
        let data = blobs(80, 7, 3, 2.0, 2);
        for kind in [ResamplerKind::Smote, ResamplerKind::Adasyn, ResamplerKind::ProWSyn] {
            let out = super::super::resample(&data, &ResamplerSpec::new(kind, 5)).unwrap();
            let n = data.n_rows();
            assert_eq!(out.data.features().slice(ndarray::s![..n, ..]), data.features().view());
            let y = out.data.target().unwrap();
            assert!((n..out.data.n_rows()).all(|i| y[i] == 1 && out.synthetic[i]));
            assert_eq!(out.n_synthetic(), 73);
        }
    }

    #[test]
    fn adasyn_weights_sum_to_one_and_ignore_safe_points() {
        // minority point at 100 has only minority neighbors
        let data = one_d(&[
            (0.0, 1),
            (0.5, 0),
            (0.6, 0),
            (0.7, 0),
            (100.0, 1),
            (100.1, 1),
            (100.2, 1),
            (0.8, 0),
            (0.9, 0),
            (1.0, 0),
        ]);
        let w = adasyn_weights(&data, 2).unwrap().unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(w[1], 0.0);
        assert_eq!(w[0], 1.0);
    }

    #[test]
    fn adasyn_falls_back_when_no_row_is_hard() {
        let data = one_d(&[(0.0, 1), (0.1, 1), (0.2, 1), (50.0, 0), (50.1, 0), (50.2, 0), (50.3, 0), (50.4, 0)]);
        let spec = ResamplerSpec {
            k_neighbors: 2,
            ..ResamplerSpec::new(ResamplerKind::Adasyn, 1)
        };
        let out = adasyn_oversample(&data, &spec).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(out.data.class_counts().unwrap(), (5, 5));
    }

    #[test]
    fn prowsyn_first_level_touches_the_majority() {
        let data = one_d(&[(0.0, 1), (1.0, 1), (10.0, 1), (-1.0, 0), (-1.5, 0), (-2.0, 0), (-3.0, 0)]);
        let levels = prowsyn_levels(&data, 1, 5).unwrap();
        assert_eq!(levels, vec![vec![0], vec![1], vec![2]]);
        let levels = prowsyn_levels(&data, 5, 5).unwrap();
        assert!(levels[0].contains(&0));
    }

    #[test]
    fn prowsyn_level_weights_decay_exponentially() {
        // three levels of equal size; 2000 synthetics split ∝ (1, e^-1, e^-2)
        let mut pts: Vec<(f64, u8)> = vec![(-1.0, 0)];
        pts.extend([(0.0, 1), (0.1, 1), (5.0, 1), (5.1, 1), (9.0, 1), (9.1, 1)]);
        pts.extend((0..2006).map(|i| (-2.0 - i as f64 * 1e-3, 0)));
        let data = one_d(&pts);
        let spec = ResamplerSpec {
            k_neighbors: 2,
            levels: 3,
            theta: 1.0,
            ..ResamplerSpec::new(ResamplerKind::ProWSyn, 3)
        };
        let levels = prowsyn_levels(&data, 2, 3).unwrap();
        assert_eq!(levels.len(), 3);
        let out = prowsyn_oversample(&data, &spec).unwrap();
        let total = out.n_synthetic() as f64;
        let z = 1.0 + (-1.0f64).exp() + (-2.0f64).exp();
        let x = out.data.features();
        let in_level = |lo: f64, hi: f64| {
            (data.n_rows()..out.data.n_rows())
                .filter(|&i| (lo..=hi).contains(&x[[i, 0]]))
                .count() as f64
        };
        for (lo, hi, l) in [(0.0, 0.1, 0), (5.0, 5.1, 1), (9.0, 9.1, 2)] {
            let expected = total * (-(l as f64)).exp() / z;
            assert!((in_level(lo, hi) - expected).abs() <= 1.0, "level {l}");
        }
    }

    #[test]
    fn prowsyn_single_level_matches_smote() {
        let data = blobs(60, 8, 2, 2.0, 8);
        let spec = ResamplerSpec {
            levels: 1,
            ..ResamplerSpec::new(ResamplerKind::ProWSyn, 21)
        };
        let a = prowsyn_oversample(&data, &spec).unwrap();
        let b = smote_oversample(&data, &spec, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn k_is_clamped_for_tiny_minorities() {
        let data = blobs(30, 2, 2, 3.0, 1);
        for kind in [ResamplerKind::Smote, ResamplerKind::Adasyn, ResamplerKind::ProWSyn] {
            let out = super::super::resample(&data, &ResamplerSpec::new(kind, 1)).unwrap();
            assert_eq!(out.data.class_counts().unwrap(), (30, 30));
        }
        let data = blobs(30, 1, 2, 3.0, 1);
        assert!(matches!(
            super::super::resample(&data, &ResamplerSpec::new(ResamplerKind::Smote, 1)),
            Err(Error::InsufficientData(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn synthetics_are_convex_combinations(seed in 0u64..10_000, kind_idx in 0usize..3) {
            let kind = [ResamplerKind::Smote, ResamplerKind::Adasyn, ResamplerKind::ProWSyn][kind_idx];
            let data = blobs(40, 6, 3, 1.5, seed);
            let out = super::super::resample(&data, &ResamplerSpec::new(kind, seed)).unwrap();
            let minority: Vec<usize> = (40..46).collect();
            let x = out.data.features();
            for i in data.n_rows()..out.data.n_rows() {
                prop_assert!(on_some_segment(data.features(), &minority, util::row(x, i)));
            }
        }
    }
}
