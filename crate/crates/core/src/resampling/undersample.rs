//! Majority-class undersampling through k-means with k = minority count.

use ndarray::Array2;

use super::{split_classes, ResampledSet, ResamplerSpec};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::kmeans::{kmeans_fit, KMeansModel};
use crate::util;

struct Clustered {
    model: KMeansModel,
    majority: Vec<usize>,
    minority: Vec<usize>,
    majority_label: u8,
}

fn cluster_majority(data: &Dataset, spec: &ResamplerSpec) -> Result<Clustered> {
    let split = split_classes(data)?;
    let points = util::take_rows(data.features(), &split.majority);
    let model = kmeans_fit(&points, split.minority.len(), spec.seed)?;
    Ok(Clustered {
        model,
        majority: split.majority,
        minority: split.minority,
        majority_label: 1 - split.minority_label,
    })
}

/// Index (into `c.majority`) of the member of cluster `k` nearest its centroid.
fn representative(c: &Clustered, data: &Dataset, k: usize) -> usize {
    let centroid = util::row(&c.model.centroids, k);
    c.model
        .members(k)
        .into_iter()
        .map(|m| (m, util::squared_euclidean(util::row(data.features(), c.majority[m]), centroid)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(m, _)| m)
        .expect("k-means clusters are non-empty")
}

/// Minority rows (original order) followed by one centroid per majority cluster.
pub fn cluster_centroids_undersample(data: &Dataset, spec: &ResamplerSpec) -> Result<ResampledSet> {
    let c = cluster_majority(data, spec)?;
    let kept = data.select_rows(&c.minority);
    let k = c.model.k();
    let d = data.n_features();
    let mut features = Array2::zeros((c.minority.len() + k, d));
    features
        .slice_mut(ndarray::s![..c.minority.len(), ..])
        .assign(kept.features());
    features.slice_mut(ndarray::s![c.minority.len().., ..]).assign(&c.model.centroids);
    let mut labels = kept.raw_labels().to_vec();
    labels.extend((0..k).map(|j| data.raw_labels()[c.majority[representative(&c, data, j)]].clone()));
    let mut target = kept.require_target()?.to_vec();
    target.extend(std::iter::repeat_n(c.majority_label, k));
    let out = Dataset::new(features, data.feature_names().to_vec(), labels)?.with_target(target.into())?;
    let mut synthetic = vec![false; c.minority.len()];
    synthetic.resize(c.minority.len() + k, true);
    Ok(ResampledSet {
        data: out,
        synthetic,
        cleaned: 0,
        warnings: Vec::new(),
    })
}

/// Like [`cluster_centroids_undersample`] but each cluster keeps its real
/// member nearest the centroid. Output rows stay in original order.
pub fn cluster_representatives_undersample(data: &Dataset, spec: &ResamplerSpec) -> Result<ResampledSet> {
    let c = cluster_majority(data, spec)?;
    let mut rows: Vec<usize> = (0..c.model.k())
        .map(|k| c.majority[representative(&c, data, k)])
        .chain(c.minority.iter().copied())
        .collect();
    rows.sort_unstable();
    let out = data.select_rows(&rows);
    Ok(ResampledSet {
        synthetic: vec![false; out.n_rows()],
        data: out,
        cleaned: 0,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::ResamplerKind;
    use super::*;

    /// Majority blobs around (0,0) and (10,10); minority of two points.
    fn two_blob_fixture() -> Dataset {
        let offsets = [(-0.5, 0.0), (0.5, 0.0), (0.0, -0.5), (0.0, 0.7), (0.1, 0.1)];
        let mut x = Vec::new();
        let mut y = Vec::new();
        for c in [0.0, 10.0] {
            for (dx, dy) in offsets {
                x.extend([c + dx, c + dy]);
                y.push(0u8);
            }
        }
        x.extend([5.0, -5.0, -5.0, 5.0]);
        y.extend([1, 1]);
        let x = Array2::from_shape_vec((12, 2), x).unwrap();
        Dataset::from_target(x, vec!["a".into(), "b".into()], y.into()).unwrap()
    }

    fn sorted_rows(x: &Array2<f64>, from: usize) -> Vec<Vec<f64>> {
        let mut r: Vec<Vec<f64>> = (from..x.nrows()).map(|i| util::row(x, i).to_vec()).collect();
        r.sort_by(|a, b| a[0].total_cmp(&b[0]));
        r
    }

    #[test]
    fn centroids_equal_blob_means() {
        let data = two_blob_fixture();
        let out = cluster_centroids_undersample(&data, &ResamplerSpec::new(ResamplerKind::ClusterCentroids, 3)).unwrap();
        assert_eq!(out.data.class_counts().unwrap(), (2, 2));
        let got = sorted_rows(out.data.features(), 2);
        // closed-form blob means: offsets average (0.02, 0.06)
        for (row, c) in got.iter().zip([0.0, 10.0]) {
            assert!((row[0] - (c + 0.02)).abs() < 1e-12);
            assert!((row[1] - (c + 0.06)).abs() < 1e-12);
        }
        assert_eq!(out.synthetic, vec![false, false, true, true]);
    }

    #[test]
    fn representatives_are_nearest_real_members() {
        let data = two_blob_fixture();
        let out = cluster_representatives_undersample(&data, &ResamplerSpec::new(ResamplerKind::ClusterRepresentatives, 3))
            .unwrap();
        assert_eq!(out.data.class_counts().unwrap(), (2, 2));
        let x = out.data.features();
        let y = out.data.target().unwrap();
        // brute force: the blob point nearest each mean is the (0.1, 0.1) offset
        let majority: Vec<Vec<f64>> = (0..4).filter(|&i| y[i] == 0).map(|i| util::row(x, i).to_vec()).collect();
        assert_eq!(majority, vec![vec![0.1, 0.1], vec![10.1, 10.1]]);
        assert!(out.synthetic.iter().all(|s| !s));
    }

    #[test]
    fn equal_sizes_keep_the_majority() {
        let x = Array2::from_shape_vec((6, 1), vec![0.0, 1.0, 2.0, 10.0, 11.0, 12.0]).unwrap();
        let data = Dataset::from_target(x, vec!["v".into()], vec![0, 0, 0, 1, 1, 1].into()).unwrap();
        let out = cluster_representatives_undersample(&data, &ResamplerSpec::default()).unwrap();
        assert_eq!(out.data, data);
        let out = cluster_centroids_undersample(&data, &ResamplerSpec::default()).unwrap();
        // positive class is treated as minority on a tie, so class 0 is clustered
        assert_eq!(sorted_rows(out.data.features(), 3), vec![vec![0.0], vec![1.0], vec![2.0]]);
    }

    #[test]
    fn minority_rows_are_untouched() {
        let data = super::super::testutil::blobs(200, 11, 3, 2.0, 7);
        for f in [cluster_centroids_undersample, cluster_representatives_undersample] {
            let out = f(&data, &ResamplerSpec::new(ResamplerKind::ClusterCentroids, 1)).unwrap();
            let y = out.data.target().unwrap();
            let mut minority: Vec<Vec<f64>> = (0..out.data.n_rows())
                .filter(|&i| y[i] == 1)
                .map(|i| util::row(out.data.features(), i).to_vec())
                .collect();
            let mut expected: Vec<Vec<f64>> = (200..211).map(|i| util::row(data.features(), i).to_vec()).collect();
            minority.sort_by(|a, b| a[0].total_cmp(&b[0]));
            expected.sort_by(|a, b| a[0].total_cmp(&b[0]));
            assert_eq!(minority, expected);
            assert!((0..out.data.n_rows()).all(|i| !(out.synthetic[i] && y[i] == 1)));
        }
    }
}
