use std::collections::HashMap;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use imbapipe::fixtures::{generate, FixtureSpec};
use imbapipe::service::router;
use imbapipe_core::bundle::ModelBundle;
use imbapipe_core::classifiers::{Family, ModelSpec};
use imbapipe_core::dataset::{default_positive_classes, encode_labels, Dataset};
use imbapipe_core::evaluation::{FeatureSubset, Pipeline};
use imbapipe_core::resampling::{ResamplerKind, ResamplerSpec};
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture() -> Dataset {
    let spec = FixtureSpec {
        rows: 800,
        features: 10,
        positives: 40,
        informative: 4,
        shift: 2.5,
        seed: 8,
    };
    encode_labels(&generate(&spec), &default_positive_classes()).unwrap()
}

fn pipeline() -> Pipeline {
    Pipeline::new(
        ResamplerSpec::new(ResamplerKind::Smote, 1),
        ModelSpec::new(Family::Lda.default_params(), 2),
        FeatureSubset::KBest(6),
    )
}

fn body_for(data: &Dataset, bundle: &ModelBundle, row: usize) -> String {
    let cols = bundle.locate_columns(data.feature_names()).unwrap();
    let features: HashMap<&str, f64> = cols
        .iter()
        .map(|&j| (data.feature_names()[j].as_str(), data.features()[[row, j]]))
        .collect();
    json!({ "features": features }).to_string()
}

async fn post(app: Router, body: String) -> (StatusCode, Value) {
    let req = Request::post("/api/predict")
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), 1 << 20).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[test]
fn saved_bundle_scores_probes_identically() {
    let data = fixture();
    let bundle = ModelBundle::train(&data, &pipeline(), 0).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bundle.json");
    bundle.save(&path).unwrap();
    let loaded = ModelBundle::load(&path).unwrap();
    assert_eq!(loaded.pipeline_id, bundle.pipeline_id);
    let cols = bundle.locate_columns(data.feature_names()).unwrap();
    // probes: fixture rows plus perturbations far outside the training range
    for i in 0..1000 {
        let row = i % data.n_rows();
        let scale = 1.0 + (i / data.n_rows()) as f64 * 10.0;
        let raw: Vec<f64> = cols.iter().map(|&j| data.features()[[row, j]] * scale).collect();
        let a = bundle.predict_row(&raw).unwrap();
        let b = loaded.predict_row(&raw).unwrap();
        assert_eq!(a.score.to_bits(), b.score.to_bits(), "probe {i}");
        assert_eq!(a.label, b.label);
    }
}

#[tokio::test]
async fn held_out_positive_is_a_candidate() {
    let data = fixture();
    let y = data.require_target().unwrap();
    let held = (0..data.n_rows()).find(|&i| y[i] == 1).unwrap();
    let rest: Vec<usize> = (0..data.n_rows()).filter(|&i| i != held).collect();
    let bundle = ModelBundle::train(&data.select_rows(&rest), &pipeline(), 0).unwrap();
    let body = body_for(&data, &bundle, held);
    let (status, v) = post(router(Some(bundle.clone()), None), body).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["label"], "Candidate");
    assert!(v["score"].as_f64().unwrap() > 0.5);
    assert_eq!(v["pipeline"], bundle.pipeline_id.as_str());
}

#[tokio::test]
async fn parallel_identical_requests_agree() {
    let data = fixture();
    let bundle = ModelBundle::train(&data, &pipeline(), 0).unwrap();
    let app = router(Some(bundle.clone()), None);
    let body = body_for(&data, &bundle, 3);
    let handles: Vec<_> = (0..100).map(|_| tokio::spawn(post(app.clone(), body.clone()))).collect();
    let mut answers = Vec::new();
    for h in handles {
        answers.push(h.await.unwrap());
    }
    assert!(answers.iter().all(|a| a == &answers[0]));
    assert_eq!(answers[0].0, StatusCode::OK);
}

#[tokio::test]
async fn unknown_feature_is_rejected_by_name() {
    let data = fixture();
    let bundle = ModelBundle::train(&data, &pipeline(), 0).unwrap();
    let mut v: Value = serde_json::from_str(&body_for(&data, &bundle, 0)).unwrap();
    v["features"]["colour"] = json!(1.0);
    let (status, err) = post(router(Some(bundle), None), v.to_string()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["unknown"], json!(["colour"]));
}
