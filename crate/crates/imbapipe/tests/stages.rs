use std::path::Path;

use imbapipe::config::ExperimentConfig;
use imbapipe::fixtures::{generate, FixtureSpec};
use imbapipe::stages::{self, Experiment, ABLATION_STAGES};
use imbapipe_core::classifiers::{Family, ModelSpec};
use imbapipe_core::dataset::{write_csv, Dataset};
use imbapipe_core::evaluation::{FeatureSubset, Pipeline};
use imbapipe_core::resampling::{ResamplerKind, ResamplerSpec};
use imbapipe_core::util::rng_from_seed;
use ndarray::Array2;
use rand::Rng;

fn small_fixture(dir: &Path, features: usize, informative: usize) {
    let spec = FixtureSpec {
        rows: 600,
        features,
        positives: 30,
        informative,
        shift: 1.4,
        seed: 17,
    };
    write_csv(&generate(&spec), dir.join("data.csv"), "label").unwrap();
}

fn experiment(dir: &Path, body: &str) -> Experiment {
    let text = format!(
        "seed = 5\n[dataset]\npath = \"{}\"\n[output]\ndir = \"{}\"\n{body}",
        dir.join("data.csv").display(),
        dir.join("out").display()
    );
    Experiment::open(ExperimentConfig::from_toml(&text).unwrap(), false).unwrap()
}

#[test]
fn balancing_resamplers_beat_no_resampling() {
    let tmp = tempfile::tempdir().unwrap();
    small_fixture(tmp.path(), 10, 4);
    let exp = experiment(tmp.path(), "[cv]\nfolds = 5\n[models]\nfamilies = [\"LDA\", \"KNN\"]\n");
    let bench = stages::resample_bench(&exp).unwrap();
    assert_eq!(bench.rows.len(), 8);
    let none = bench.rows.iter().find(|r| r.kind == ResamplerKind::None).unwrap().mean;
    for row in bench.rows.iter().filter(|r| r.kind != ResamplerKind::None) {
        assert!(row.mean >= none, "{} {} < None {}", row.name, row.mean, none);
    }
    assert_eq!(bench.top.len(), 3);
    assert!(!bench.top.contains(&ResamplerKind::None));
    for p in ["resample_bench.csv", "resample_bench.txt", "resample_bench.json"] {
        assert!(exp.dir.exists(p), "{p} missing");
    }
}

#[test]
fn one_resampler_roster_gives_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    small_fixture(tmp.path(), 8, 3);
    let exp = experiment(
        tmp.path(),
        "[cv]\nfolds = 3\n[resampling]\nroster = [\"SMOTE\"]\n[models]\nfamilies = [\"GNB\"]\n",
    );
    let bench = stages::resample_bench(&exp).unwrap();
    assert_eq!(bench.rows.len(), 1);
    assert_eq!(bench.top, vec![ResamplerKind::Smote]);
    let csv = std::fs::read_to_string(exp.dir.path("resample_bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "{csv}");
}

#[test]
fn model_select_keeps_the_better_grid_point() {
    let tmp = tempfile::tempdir().unwrap();
    small_fixture(tmp.path(), 8, 3);
    let exp = experiment(
        tmp.path(),
        r#"
[cv]
folds = 4
[resampling]
roster = ["SMOTE"]
[models]
families = ["KNN"]
[[models.grid]]
family = "KNN"
k = 1
[[models.grid]]
family = "KNN"
k = 15
[[models.defaults]]
family = "KNN"
k = 15
"#,
    );
    stages::resample_bench(&exp).unwrap();
    let sel = stages::model_select(&exp).unwrap();
    assert_eq!(sel.rows.len(), 1);
    let row = &sel.rows[0];
    assert_eq!(row.grid_size, 2);
    // score both points independently on the same folds
    let ctx = exp.context(exp.cfg.cv_plan()).unwrap();
    let scored: Vec<f64> = exp
        .cfg
        .grid(Family::Knn)
        .into_iter()
        .map(|params| {
            let mut p = row.pipeline.clone();
            p.model.params = params;
            ctx.evaluate(&p).unwrap().mean
        })
        .collect();
    let best = scored.iter().copied().fold(f64::MIN, f64::max);
    assert_eq!(row.score.mean, best, "{scored:?}");
}

#[test]
fn feature_select_prunes_uninformative_columns() {
    let tmp = tempfile::tempdir().unwrap();
    small_fixture(tmp.path(), 20, 5);
    let exp = experiment(
        tmp.path(),
        "[cv]\nfolds = 4\n[resampling]\nroster = [\"SMOTE\"]\n[models]\nfamilies = [\"LDA\"]\n[feature_selection]\nk_min = 2\n",
    );
    stages::resample_bench(&exp).unwrap();
    stages::model_select(&exp).unwrap();
    let report = stages::feature_select(&exp).unwrap();
    let row = &report.rows[0];
    assert!(row.best_k <= 12, "kept {} features", row.best_k);
    let ks: Vec<usize> = row.sweep.iter().map(|s| s.k).collect();
    assert_eq!(ks, (2..=20).collect::<Vec<_>>());
    let best = row.sweep.iter().filter_map(|s| s.mean).fold(f64::MIN, f64::max);
    assert_eq!(row.score.mean, best);
    assert!(row.id.ends_with(&format!("/{}", row.best_k)), "{}", row.id);
}

/// Two columns, positives shifted in column 0 only.
fn separable(dir: &Path) {
    let mut rng = rng_from_seed(9);
    let n = 400;
    let y: Vec<u8> = (0..n).map(|i| u8::from(i % 8 == 0)).collect();
    let x = Array2::from_shape_fn((n, 2), |(i, j)| {
        let shift = if j == 0 && y[i] == 1 { 3.0 } else { 0.0 };
        shift + rng.random_range(-1.0..1.0)
    });
    let labels = y.iter().map(|&v| if v == 1 { "Candidate" } else { "Limit_effect" }.to_string()).collect();
    let data = Dataset::new(x, vec!["signal".into(), "noise".into()], labels).unwrap();
    write_csv(&data, dir.join("data.csv"), "label").unwrap();
}

fn pipeline(family: Family, features: FeatureSubset) -> Pipeline {
    Pipeline::new(
        ResamplerSpec::new(ResamplerKind::Smote, 1),
        ModelSpec::new(family.default_params(), 2),
        features,
    )
}

#[test]
fn identical_pipelines_are_not_significantly_different() {
    let tmp = tempfile::tempdir().unwrap();
    separable(tmp.path());
    let exp = experiment(tmp.path(), "[cv]\nfolds = 5\n[compare]\nruns = 10\n");
    let p = pipeline(Family::Gnb, FeatureSubset::All);
    let cmp = stages::compare_pipelines(&exp, &[p.clone(), p]).unwrap();
    let nem = cmp.nemenyi.unwrap();
    assert_eq!(nem.average_ranks, vec![1.5, 1.5]);
    assert!(!nem.significant[0][1]);
    assert_eq!(cmp.friedman.unwrap().statistic, 0.0);
}

#[test]
fn dominant_pipeline_wins_every_run() {
    let tmp = tempfile::tempdir().unwrap();
    separable(tmp.path());
    let exp = experiment(tmp.path(), "[cv]\nfolds = 5\n[compare]\nruns = 10\n");
    let strong = pipeline(Family::Lda, FeatureSubset::Columns(vec![0]));
    let weak = pipeline(Family::Gnb, FeatureSubset::Columns(vec![1]));
    let cmp = stages::compare_pipelines(&exp, &[weak, strong]).unwrap();
    assert_eq!(cmp.winner, 1);
    assert_eq!(cmp.run_winners.len(), 10);
    assert!(cmp.run_winners.iter().all(|w| *w == cmp.labels[1]), "{:?}", cmp.run_winners);
    let nem = cmp.nemenyi.unwrap();
    assert_eq!(nem.average_ranks, vec![2.0, 1.0]);
    assert!(nem.significant[0][1]);
}

#[test]
fn ablation_has_one_row_per_stage() {
    let tmp = tempfile::tempdir().unwrap();
    small_fixture(tmp.path(), 8, 3);
    let exp = experiment(
        tmp.path(),
        "[cv]\nfolds = 3\n[resampling]\nroster = [\"SMOTE\", \"ClusterCentroids\"]\ntop = 1\n[models]\nfamilies = [\"GNB\", \"KNN\"]\n[feature_selection]\nk_min = 6\n",
    );
    let report = stages::ablation(&exp).unwrap();
    let names: Vec<&str> = report.rows.iter().map(|r| r.stage.as_str()).collect();
    assert_eq!(names, ABLATION_STAGES);
    assert_eq!(report.rows[0].pipelines, 2);
    assert_eq!(report.top_resamplers.len(), 1);
    // later rows search supersets of the earlier rows' choices
    assert!(report.rows[2].best >= report.rows[1].best - 1e-12);
    assert!(report.rows[3].best >= report.rows[2].best - 1e-12);
}

#[test]
fn stages_reuse_cached_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    small_fixture(tmp.path(), 8, 3);
    let body = "[cv]\nfolds = 3\n[resampling]\nroster = [\"SMOTE\"]\n[models]\nfamilies = [\"GNB\"]\n";
    let exp = experiment(tmp.path(), body);
    let first = stages::resample_bench(&exp).unwrap();
    let p = exp.dir.path("resample_bench.json");
    let stamp = std::fs::metadata(&p).unwrap().modified().unwrap();
    let again = stages::resample_bench(&experiment(tmp.path(), body)).unwrap();
    assert_eq!(first, again);
    assert_eq!(std::fs::metadata(&p).unwrap().modified().unwrap(), stamp);
}
