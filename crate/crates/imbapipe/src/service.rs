//! HTTP prediction service over one immutable model bundle.
//!
//! `POST /api/predict` takes `{"features": {"name": value, ...}}` with raw
//! (unnormalized) values and answers `{label, score, pipeline}`;
//! `GET /api/schema` lists the expected names; `GET /health` reports readiness.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use imbapipe_core::bundle::ModelBundle;
use imbapipe_core::Error;
use serde::Serialize;
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

#[derive(Clone)]
pub struct AppState {
    bundle: Option<Arc<ModelBundle>>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    missing: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    unknown: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    invalid: Vec<String>,
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    let body = ErrorBody {
        error: msg.into(),
        missing: vec![],
        unknown: vec![],
        invalid: vec![],
    };
    (status, Json(body)).into_response()
}

fn no_bundle() -> Response {
    error(StatusCode::SERVICE_UNAVAILABLE, "no model bundle loaded")
}

/// Builds the router. `cors_origin` restricts CORS to one origin; `None` allows any.
pub fn router(bundle: Option<ModelBundle>, cors_origin: Option<&str>) -> Router {
    let origin = match cors_origin {
        Some(o) => AllowOrigin::exact(HeaderValue::from_str(o).unwrap_or(HeaderValue::from_static("null"))),
        None => AllowOrigin::from(Any),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/health", get(health))
        .route("/api/schema", get(schema))
        .route("/api/predict", post(predict))
        .layer(cors)
        .with_state(AppState {
            bundle: bundle.map(Arc::new),
        })
}

async fn health(State(state): State<AppState>) -> Response {
    Json(json!({
        "status": "ok",
        "bundle_loaded": state.bundle.is_some(),
        "version": env!("CARGO_PKG_VERSION"),
    }))
    .into_response()
}

async fn schema(State(state): State<AppState>) -> Response {
    let Some(b) = state.bundle else {
        return no_bundle();
    };
    Json(json!({
        "features": b.feature_names,
        "positive_label": b.positive_label,
        "pipeline": b.pipeline_id,
    }))
    .into_response()
}

/// Parses the request body into a name-to-value map. Non-numeric values
/// map to NaN so the bundle reports them by name.
fn parse_features(body: &[u8]) -> Result<HashMap<String, f64>, Response> {
    let shape_error = || {
        error(
            StatusCode::BAD_REQUEST,
            "request body must be a JSON object {\"features\": {name: number, ...}}",
        )
    };
    let value: Value = serde_json::from_slice(body).map_err(|_| shape_error())?;
    let features = value.get("features").and_then(Value::as_object).ok_or_else(shape_error)?;
    Ok(features
        .iter()
        .map(|(k, v)| (k.clone(), v.as_f64().unwrap_or(f64::NAN)))
        .collect())
}

async fn predict(State(state): State<AppState>, body: Bytes) -> Response {
    let Some(b) = state.bundle else {
        return no_bundle();
    };
    let values = match parse_features(&body) {
        Ok(v) => v,
        Err(r) => return r,
    };
    match b.predict_named(&values) {
        Ok(p) => Json(p).into_response(),
        Err(Error::PredictionInput {
            missing,
            unknown,
            non_finite,
        }) => {
            let mut parts = Vec::new();
            if !missing.is_empty() {
                parts.push(format!("missing features: {}", missing.join(", ")));
            }
            if !unknown.is_empty() {
                parts.push(format!("unknown features: {}", unknown.join(", ")));
            }
            if !non_finite.is_empty() {
                parts.push(format!("non-numeric or non-finite values: {}", non_finite.join(", ")));
            }
            let body = ErrorBody {
                error: parts.join("; "),
                missing,
                unknown,
                invalid: non_finite,
            };
            (StatusCode::BAD_REQUEST, Json(body)).into_response()
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

/// Binds `addr`, reports the bound address through `on_bound`, then serves
/// until the process ends.
pub async fn serve(
    addr: SocketAddr,
    app: Router,
    on_bound: impl FnOnce(SocketAddr),
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, app).await
}

#[cfg(test)]
mod tests {
    use super::*;
    use axum::body::{to_bytes, Body};
    use axum::http::Request;
    use imbapipe_core::classifiers::TrainedModel;
    use imbapipe_core::dataset::NormalizationParams;
    use imbapipe_core::evaluation::Pipeline;
    use tower::ServiceExt;

    fn constant_bundle() -> ModelBundle {
        let names: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let pipeline: Pipeline = serde_json::from_value(json!({
            "resampler": {"kind": "None"},
            "model": {"params": {"family": "KNN", "k": 1}, "seed": 0},
            "features": "all"
        }))
        .unwrap();
        ModelBundle {
            format_version: imbapipe_core::bundle::BUNDLE_FORMAT_VERSION,
            pipeline_id: "KNN-None/2".into(),
            pipeline,
            feature_names: names.clone(),
            selection_rank: names.clone(),
            normalizer: NormalizationParams {
                feature_names: names,
                mean: vec![0.0, 0.0],
                std: vec![1.0, 1.0],
            },
            model: TrainedModel::constant(1, 2),
            positive_label: "Candidate".into(),
            negative_label: "Not candidate".into(),
            training_rows: 10,
            created_unix: 0,
        }
    }

    async fn call(app: Router, method: &str, uri: &str, body: &str) -> (StatusCode, Value) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(Body::from(body.to_string()))
            .unwrap();
        let resp = app.oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = to_bytes(resp.into_body(), 1 << 20).await.unwrap();
        (status, serde_json::from_slice(&bytes).unwrap())
    }

    #[tokio::test]
    async fn health_reflects_bundle_state() {
        let (s, v) = call(router(None, None), "GET", "/health", "").await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v["status"], "ok");
        assert_eq!(v["bundle_loaded"], false);
        let (_, v) = call(router(Some(constant_bundle()), None), "GET", "/health", "").await;
        assert_eq!(v["bundle_loaded"], true);
    }

    #[tokio::test]
    async fn no_bundle_is_503() {
        let (s, _) = call(router(None, None), "GET", "/api/schema", "").await;
        assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
        let (s, v) = call(router(None, None), "POST", "/api/predict", r#"{"features":{}}"#).await;
        assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
        assert!(v["error"].is_string());
    }

    #[tokio::test]
    async fn constant_positive_model_predicts_candidate() {
        let app = router(Some(constant_bundle()), None);
        let (s, v) = call(app, "POST", "/api/predict", r#"{"features":{"a":1.5,"b":-2}}"#).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v, json!({"label": "Candidate", "score": 1.0, "pipeline": "KNN-None/2"}));
    }

    #[tokio::test]
    async fn missing_feature_is_named() {
        let app = router(Some(constant_bundle()), None);
        let (s, v) = call(app, "POST", "/api/predict", r#"{"features":{"a":1.5}}"#).await;
        assert_eq!(s, StatusCode::BAD_REQUEST);
        assert_eq!(v["missing"], json!(["b"]));
    }

    #[tokio::test]
    async fn unknown_and_non_numeric_fields_are_named() {
        let app = router(Some(constant_bundle()), None);
        let (s, v) = call(app, "POST", "/api/predict", r#"{"features":{"a":"x","b":1,"c":2}}"#).await;
        assert_eq!(s, StatusCode::BAD_REQUEST);
        assert_eq!(v["missing"], json!([]));
        assert_eq!(v["unknown"], json!(["c"]));
        assert_eq!(v["invalid"], json!(["a"]));
    }

    #[tokio::test]
    async fn malformed_body_is_400() {
        let app = router(Some(constant_bundle()), None);
        let (s, _) = call(app.clone(), "POST", "/api/predict", "not json").await;
        assert_eq!(s, StatusCode::BAD_REQUEST);
        let (s, _) = call(app, "POST", "/api/predict", r#"{"a":1}"#).await;
        assert_eq!(s, StatusCode::BAD_REQUEST);
    }

    #[tokio::test]
    async fn schema_is_stable() {
        let app = router(Some(constant_bundle()), None);
        let (_, a) = call(app.clone(), "GET", "/api/schema", "").await;
        let (_, b) = call(app, "GET", "/api/schema", "").await;
        assert_eq!(a, b);
        assert_eq!(a["features"], json!(["a", "b"]));
        assert_eq!(a["positive_label"], "Candidate");
    }

    #[tokio::test]
    async fn cors_header_is_sent() {
        let app = router(Some(constant_bundle()), Some("http://localhost:4200"));
        let req = Request::builder()
            .uri("/health")
            .header("origin", "http://localhost:4200")
            .body(Body::empty())
            .unwrap();
        let resp = app.oneshot(req).await.unwrap();
        assert_eq!(
            resp.headers().get("access-control-allow-origin").unwrap(),
            "http://localhost:4200"
        );
    }
}
