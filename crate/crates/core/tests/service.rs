mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use common::{golden_cases, http, LiveServer};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use toolreward::service::{router, HealthResponse, ScoreResponse, ServiceConfig, VERSION};
use toolreward::{score, RewardScheme};
use tower::ServiceExt;

async fn call(method: &str, path: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(path)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = router(ServiceConfig::default()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn golden_request() -> (Value, Vec<toolreward::RewardBreakdown>) {
    let cases = golden_cases();
    let mut items = Vec::new();
    let mut expected = Vec::new();
    for (i, c) in cases.iter().enumerate() {
        let scheme = RewardScheme::ALL[i % 4];
        items.push(json!({"instance": c.instance, "reply": c.reply, "scheme": scheme}));
        expected.push(score(&c.instance, &c.reply, scheme));
    }
    (json!({"items": items}), expected)
}

#[tokio::test]
async fn score_preserves_order_and_matches_library() {
    let (body, expected) = golden_request();
    let (status, v) = call("POST", "/v1/score", body).await;
    assert_eq!(status, StatusCode::OK);
    let resp: ScoreResponse = serde_json::from_value(v).unwrap();
    assert_eq!(resp.results, expected);
    assert_eq!(resp.version, VERSION);
}

#[tokio::test]
async fn healthz_reports_version() {
    let (status, v) = call("GET", "/v1/healthz", Value::Null).await;
    assert_eq!(status, StatusCode::OK);
    let h: HealthResponse = serde_json::from_value(v).unwrap();
    assert_eq!(
        (h.status.as_str(), h.version.as_str()),
        ("ok", env!("CARGO_PKG_VERSION"))
    );
}

#[tokio::test]
async fn errors_are_structured() {
    let inst = toolreward::fixtures::email_walmart_instance();
    let cases = [
        (json!({"items": []}), "empty_batch", None),
        (
            json!({"items": [{"instance": inst, "reply": "x", "scheme": "bogus"}]}),
            "unknown_scheme",
            Some(0),
        ),
        (
            json!({"items": [{"instance": inst, "reply": "x"}, {"reply": "x"}]}),
            "invalid_request",
            Some(1),
        ),
        (json!([1, 2]), "invalid_request", None),
    ];
    for (body, code, index) in cases {
        let (status, v) = call("POST", "/v1/score", body).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        assert_eq!(v["error"]["code"], code);
        assert!(v["error"]["message"].is_string());
        assert_eq!(v["error"]["item_index"].as_u64(), index);
    }
    let mut bad = inst.clone();
    bad.ground_truth.calls[0].name = "not_a_tool".into();
    let (_, v) = call("POST", "/v1/score", json!({"items": [{"instance": bad, "reply": "x"}]})).await;
    assert_eq!(v["error"]["code"], "invalid_instance");
}

#[test]
fn live_server_answers_concurrent_requests_identically() {
    let server = LiveServer::start(ServiceConfig::default());
    let (status, body) = http(server.addr, "GET", "/v1/healthz", b"");
    assert_eq!(status, 200);
    assert_eq!(serde_json::from_slice::<Value>(&body).unwrap()["status"], "ok");

    let (req, expected) = golden_request();
    let req = req.to_string().into_bytes();
    let (_, serial) = http(server.addr, "POST", "/v1/score", &req);
    let bodies: Vec<(u16, Vec<u8>)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..10)
            .map(|_| s.spawn(|| http(server.addr, "POST", "/v1/score", &req)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (status, body) in &bodies {
        assert_eq!(*status, 200);
        assert_eq!(body, &serial);
    }
    let resp: ScoreResponse = serde_json::from_slice(&serial).unwrap();
    assert_eq!(resp.results, expected);

    let (status, body) = http(server.addr, "POST", "/v1/score", b"{oops");
    assert_eq!(status, 400);
    assert_eq!(
        serde_json::from_slice::<Value>(&body).unwrap()["error"]["code"],
        "invalid_json"
    );
}
