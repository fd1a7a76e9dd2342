//! Stateless HTTP endpoint for batch reward scoring.
//!
//! ```text
//! POST /v1/score   {"items": [{"instance": {..}, "reply": "..", "scheme": "binary_with_format"}, ..]}
//!               -> 200 {"results": [breakdown, ..], "version": ".."}
//!               -> 400 {"error": {"code", "message", "item_index"?}}
//! GET  /v1/healthz -> 200 {"status": "ok", "version": ".."}
//! ```
//!
//! `scheme` may be omitted per item; the configured default applies.
//! Malformed replies are not errors: they score 0 with a failure reason.

use crate::model::{RewardBreakdown, RewardScheme, TrainingInstance};
use crate::pipeline::validate_instance;
use crate::reward::score;
use axum::body::Bytes;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{extract::State, Router};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::future::Future;
use std::sync::Arc;
use std::time::Instant;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_MAX_BATCH: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub max_batch: usize,
    pub default_scheme: RewardScheme,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            max_batch: DEFAULT_MAX_BATCH,
            default_scheme: RewardScheme::BinaryWithFormat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub results: Vec<RewardBreakdown>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub item_index: Option<usize>,
}

impl ApiError {
    fn new(code: &str, message: impl Into<String>) -> Self {
        ApiError {
            code: code.to_owned(),
            message: message.into(),
            item_index: None,
        }
    }

    fn at(mut self, index: usize) -> Self {
        self.item_index = Some(index);
        self
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a ApiError,
}

struct Item {
    instance: TrainingInstance,
    reply: String,
    scheme: RewardScheme,
}

fn parse_item(index: usize, value: Value, default_scheme: RewardScheme) -> Result<Item, ApiError> {
    let Value::Object(mut obj) = value else {
        return Err(ApiError::new("invalid_request", "item must be an object").at(index));
    };
    let reply = match obj.remove("reply") {
        Some(Value::String(s)) => s,
        _ => return Err(ApiError::new("invalid_request", "`reply` must be a string").at(index)),
    };
    let scheme = match obj.remove("scheme") {
        None | Some(Value::Null) => default_scheme,
        Some(Value::String(s)) => s
            .parse()
            .map_err(|_| ApiError::new("unknown_scheme", format!("unknown scheme `{s}`")).at(index))?,
        Some(_) => return Err(ApiError::new("invalid_request", "`scheme` must be a string").at(index)),
    };
    let instance: TrainingInstance = match obj.remove("instance") {
        Some(v) => serde_json::from_value(v).map_err(|e| ApiError::new("invalid_instance", e.to_string()).at(index))?,
        None => return Err(ApiError::new("invalid_request", "missing `instance`").at(index)),
    };
    validate_instance(&instance)
        .map_err(|reason| ApiError::new("invalid_instance", format!("instance rejected: {reason:?}")).at(index))?;
    Ok(Item {
        instance,
        reply,
        scheme,
    })
}

/// Transport-independent core of `POST /v1/score`.
pub fn score_request(body: &[u8], config: &ServiceConfig) -> Result<ScoreResponse, ApiError> {
    let value: Value = serde_json::from_slice(body)
        .map_err(|e| ApiError::new("invalid_json", format!("body is not valid JSON: {e}")))?;
    let Value::Object(mut obj) = value else {
        return Err(ApiError::new("invalid_request", "body must be a JSON object"));
    };
    let Some(Value::Array(items)) = obj.remove("items") else {
        return Err(ApiError::new("invalid_request", "`items` must be an array"));
    };
    if items.is_empty() {
        return Err(ApiError::new("empty_batch", "`items` must not be empty"));
    }
    if items.len() > config.max_batch {
        return Err(ApiError::new(
            "batch_too_large",
            format!("{} items exceed the limit of {}", items.len(), config.max_batch),
        ));
    }
    let items = items
        .into_iter()
        .enumerate()
        .map(|(i, v)| parse_item(i, v, config.default_scheme))
        .collect::<Result<Vec<_>, _>>()?;
    let results = items
        .par_iter()
        .map(|it| score(&it.instance, &it.reply, it.scheme))
        .collect();
    Ok(ScoreResponse {
        results,
        version: VERSION.to_owned(),
    })
}

fn json_response(status: StatusCode, body: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn score_handler(State(config): State<Arc<ServiceConfig>>, body: Bytes) -> Response {
    let started = Instant::now();
    let (status, bytes, batch) = match score_request(&body, &config) {
        Ok(resp) => {
            let n = resp.results.len();
            (StatusCode::OK, serde_json::to_vec(&resp), n.to_string())
        }
        Err(err) => (
            StatusCode::BAD_REQUEST,
            serde_json::to_vec(&ErrorBody { error: &err }),
            "-".to_owned(),
        ),
    };
    log::info!(
        "POST /v1/score batch={batch} status={} latency_us={}",
        status.as_u16(),
        started.elapsed().as_micros()
    );
    json_response(status, bytes.expect("response serializes"))
}

async fn health_handler() -> Response {
    let started = Instant::now();
    let body = serde_json::to_vec(&HealthResponse {
        status: "ok".into(),
        version: VERSION.into(),
    })
    .expect("response serializes");
    log::info!(
        "GET /v1/healthz batch=- status=200 latency_us={}",
        started.elapsed().as_micros()
    );
    json_response(StatusCode::OK, body)
}

pub fn router(config: ServiceConfig) -> Router {
    Router::new()
        .route("/v1/score", post(score_handler))
        .route("/v1/healthz", get(health_handler))
        .with_state(Arc::new(config))
}

/// Serve until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    config: ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(config))
        .with_graceful_shutdown(shutdown)
        .await
}
