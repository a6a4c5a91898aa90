//! Seeded synthetic stand-ins for the two case-study tables. They copy the
//! shape (rows, features, positives) only: two overlapping Gaussian
//! clusters over a handful of informative columns, the rest pure noise,
//! every column put on its own scale.

use imbapipe_core::dataset::Dataset;
use imbapipe_core::util::rng_from_seed;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureSpec {
    pub rows: usize,
    pub features: usize,
    pub positives: usize,
    pub informative: usize,
    /// Per-column mean shift of the positive cluster, in noise std units.
    pub shift: f64,
    pub seed: u64,
}

impl FixtureSpec {
    pub fn degotalls_like(seed: u64) -> Self {
        Self {
            rows: 6004,
            features: 37,
            positives: 65,
            informative: 8,
            shift: 1.1,
            seed,
        }
    }

    pub fn castellfollit_like(seed: u64) -> Self {
        Self {
            rows: 10371,
            features: 31,
            positives: 38,
            informative: 7,
            shift: 1.2,
            seed,
        }
    }

    pub fn by_name(name: &str, seed: u64) -> Option<Self> {
        match name {
            "degotalls-like" => Some(Self::degotalls_like(seed)),
            "castellfollit-like" => Some(Self::castellfollit_like(seed)),
            _ => None,
        }
    }
}

pub const FIXTURE_NAMES: [&str; 2] = ["degotalls-like", "castellfollit-like"];

const NEGATIVE_LABELS: [(&str, f64); 4] = [
    ("Limit_effect", 0.60),
    ("Vegetation", 0.25),
    ("Unknow", 0.13),
    ("Precursor", 0.02),
];

/// Point-cloud cluster statistics in the style of the case-study tables.
pub fn feature_names(d: usize) -> Vec<String> {
    let bases = ["x", "y", "z", "m3c2", "nx", "ny", "nz", "roughness", "density"];
    let stats = ["mean", "std", "min", "max"];
    let mut names = vec!["n_points".to_string()];
    names.extend(bases.iter().flat_map(|b| stats.iter().map(move |s| format!("{b}_{s}"))));
    if d <= names.len() {
        names.truncate(d);
    } else {
        names.extend((names.len()..d).map(|j| format!("f{j}")));
    }
    names
}

/// Generates the fixture; the informative columns are spread over the table.
pub fn generate(spec: &FixtureSpec) -> Dataset {
    assert!(spec.positives < spec.rows && spec.informative <= spec.features);
    let mut rng = rng_from_seed(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let d = spec.features;

    let mut positive = vec![false; spec.rows];
    positive[..spec.positives].iter_mut().for_each(|p| *p = true);
    positive.shuffle(&mut rng);

    let mut columns: Vec<usize> = (0..d).collect();
    columns.shuffle(&mut rng);
    let informative = &columns[..spec.informative];
    let mut direction = vec![0.0; d];
    for &j in informative {
        direction[j] = if rng.random_bool(0.5) { spec.shift } else { -spec.shift };
    }
    let scale: Vec<f64> = (0..d).map(|_| 10f64.powf(rng.random_range(-1.0..3.0))).collect();
    let offset: Vec<f64> = (0..d).map(|_| rng.random_range(-500.0..500.0)).collect();

    let mut x = Array2::zeros((spec.rows, d));
    let mut labels = Vec::with_capacity(spec.rows);
    for (i, &pos) in positive.iter().enumerate() {
        for j in 0..d {
            let z = normal.sample(&mut rng);
            let v = if pos { direction[j] + 1.3 * z } else { z };
            x[[i, j]] = offset[j] + scale[j] * v;
        }
        labels.push(if pos { "Candidate".to_string() } else { negative_label(rng.random()) });
    }
    Dataset::new(x, feature_names(d), labels).expect("fixture is well formed")
}

fn negative_label(u: f64) -> String {
    let mut acc = 0.0;
    for (name, p) in NEGATIVE_LABELS {
        acc += p;
        if u < acc {
            return name.to_string();
        }
    }
    NEGATIVE_LABELS[0].0.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use imbapipe_core::dataset::{default_positive_classes, encode_labels};

    #[test]
    fn shapes_match_the_case_studies() {
        for (name, rows, d, pos) in [("degotalls-like", 6004, 37, 65), ("castellfollit-like", 10371, 31, 38)] {
            let data = generate(&FixtureSpec::by_name(name, 1).unwrap());
            assert_eq!((data.n_rows(), data.n_features()), (rows, d));
            let enc = encode_labels(&data, &default_positive_classes()).unwrap();
            assert_eq!(enc.class_counts().unwrap(), (rows - pos, pos));
        }
    }

    #[test]
    fn seeded_and_reproducible() {
        let a = generate(&FixtureSpec::degotalls_like(5));
        assert_eq!(a, generate(&FixtureSpec::degotalls_like(5)));
        assert_ne!(a, generate(&FixtureSpec::degotalls_like(6)));
    }

    #[test]
    fn names_are_unique() {
        let mut n = feature_names(40);
        n.sort();
        n.dedup();
        assert_eq!(n.len(), 40);
    }
}
