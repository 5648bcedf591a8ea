mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use common::{golden_answers, write_scan};
use sandbench::{api, Orchestrator, RunManifest};

struct Reply {
    status: StatusCode,
    content_type: String,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap()
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> Reply {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(serde_json::to_vec(&b).unwrap())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let content_type = resp
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|v| v.to_str().unwrap().to_string())
        .unwrap_or_default();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, content_type, body }
}

fn setup() -> (tempfile::TempDir, std::path::PathBuf, Arc<Orchestrator>, Router) {
    let dir = tempfile::tempdir().unwrap();
    let scan = write_scan(dir.path());
    let o = Arc::new(Orchestrator::open(dir.path().join("runs")).unwrap());
    let app = api::router(o.clone());
    (dir, scan, o, app)
}

#[tokio::test]
async fn healthz_answers() {
    let (_dir, _scan, _o, app) = setup();
    let r = call(&app, "GET", "/v1/healthz", None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["status"], "ok");
    assert_eq!(call(&app, "GET", "/healthz", None).await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn create_then_get_returns_the_same_manifest() {
    let (_dir, scan, _o, app) = setup();
    let r = call(&app, "POST", "/v1/runs", Some(json!({ "input": scan }))).await;
    assert_eq!(r.status, StatusCode::CREATED);
    assert!(r.content_type.starts_with("application/json"));
    let created: RunManifest = serde_json::from_slice(&r.body).unwrap();
    let g = call(&app, "GET", &format!("/v1/runs/{}", created.id), None).await;
    assert_eq!(g.status, StatusCode::OK);
    assert_eq!(g.body, r.body);
}

#[tokio::test]
async fn errors_carry_reason_codes() {
    let (dir, _scan, _o, app) = setup();
    let r = call(&app, "GET", "/v1/runs/0d8f5f0e-0000-4000-8000-000000000000", None).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["error"]["code"], "not_found");

    let missing = dir.path().join("absent.ply");
    let r = call(&app, "POST", "/v1/runs", Some(json!({ "input": missing }))).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"]["code"], "missing_input");

    let r = call(&app, "POST", "/v1/runs", Some(json!({ "nope": 1 }))).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"]["code"], "invalid_json");
}

#[tokio::test]
async fn wizard_and_advance_drive_a_run_to_done() {
    let (_dir, scan, _o, app) = setup();
    let m = call(&app, "POST", "/v1/runs", Some(json!({ "input": scan }))).await.json();
    let id = m["id"].as_str().unwrap().to_string();

    let r = call(&app, "POST", &format!("/v1/runs/{id}/advance"), None).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["error"]["code"], "protocol_error");
    let r = call(&app, "GET", &format!("/v1/runs/{id}/artifacts/trajectory"), None).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["error"]["code"], "no_artifact");

    let mut m = m;
    for a in golden_answers() {
        let r = call(&app, "POST", &format!("/v1/runs/{id}/wizard"), Some(json!({ "text": a }))).await;
        assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
        m = r.json();
    }
    assert_eq!(m["wizard"]["status"], "done");
    assert!(m["stages"].as_object().unwrap().values().all(|s| s["status"]["state"] == "ok"));

    for (kind, ct) in [
        ("cloud", "application/octet-stream"),
        ("defects", "application/json"),
        ("path", "application/json"),
        ("trajectory", "text/csv"),
        ("metrics", "application/json"),
        ("transcript", "text/plain; charset=utf-8"),
    ] {
        let r = call(&app, "GET", &format!("/v1/runs/{id}/artifacts/{kind}"), None).await;
        assert_eq!(r.status, StatusCode::OK, "{kind}");
        assert_eq!(r.content_type, ct, "{kind}");
        assert_eq!(r.body.len() as u64, m["outputs"][kind]["bytes"].as_u64().unwrap(), "{kind}");
    }
    let r = call(&app, "GET", &format!("/v1/runs/{id}/artifacts/bogus"), None).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);

    let r = call(&app, "POST", &format!("/v1/runs/{id}/advance"), None).await;
    assert_eq!(r.json()["error"]["code"], "protocol_error");
}

#[tokio::test]
async fn locked_run_answers_conflict() {
    let (_dir, scan, o, app) = setup();
    let m = call(&app, "POST", "/v1/runs", Some(json!({ "input": scan }))).await.json();
    let id = m["id"].as_str().unwrap().to_string();
    let held = o.store().lock(&id).unwrap();
    let r = call(&app, "POST", &format!("/v1/runs/{id}/wizard"), Some(json!({ "text": "sanding" }))).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.json()["error"]["code"], "conflict");
    // Reads are not blocked.
    assert_eq!(call(&app, "GET", &format!("/v1/runs/{id}"), None).await.status, StatusCode::OK);
    drop(held);
    let r = call(&app, "POST", &format!("/v1/runs/{id}/wizard"), Some(json!({ "text": "sanding" }))).await;
    assert_eq!(r.status, StatusCode::OK);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_answers_one_wins_one_conflicts() {
    let (_dir, scan, _o, app) = setup();
    let m = call(&app, "POST", "/v1/runs", Some(json!({ "input": scan }))).await.json();
    let id = m["id"].as_str().unwrap().to_string();
    let answers = golden_answers();
    for a in &answers[..5] {
        call(&app, "POST", &format!("/v1/runs/{id}/wizard"), Some(json!({ "text": a }))).await;
    }
    // This answer starts the scan..validate chain, which keeps the run busy.
    let uri = format!("/v1/runs/{id}/wizard");
    let body = json!({ "text": answers[5] });
    let (a, b) = tokio::join!(call(&app, "POST", &uri, Some(body.clone())), call(&app, "POST", &uri, Some(body)));
    let mut statuses = [a.status, b.status];
    statuses.sort();
    assert_eq!(statuses, [StatusCode::OK, StatusCode::CONFLICT]);
}
