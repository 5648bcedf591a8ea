mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use common::{golden_answers, write_scan};
use sandbench::{ArtifactKind, Orchestrator, RunConfig, RunManifest};
use sandbench_wizard::GOLDEN_TRANSCRIPT;

fn sandbench(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sandbench")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(sandbench(&["--help"]).status.code(), Some(0));
    assert_eq!(sandbench(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(sandbench(&["detect", "/nonexistent/scan.ply"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let line = dir.path().join("line.xyz");
    fs::write(&line, "0 0 0 0\n1 0 0 0\n2 0 0 0\n").unwrap();
    assert_eq!(sandbench(&["plan", s(&line)]).status.code(), Some(2));

    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"plant": {"force_limit": 4.0}}"#).unwrap();
    let scan = write_scan(dir.path());
    let out = sandbench(&["--config", s(&cfg), "simulate", s(&scan)]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(sandbench(&["--config", s(&cfg), "plan", s(&scan)]).status.code(), Some(1));
}

#[test]
fn standalone_commands_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let scan = dir.path().join("gen.xyz");
    let out = sandbench(&["--out", s(&scan), "--seed", "3", "scan", "gen", "--size", "80", "100", "--defect", "0,0,8,-0.8"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ply = dir.path().join("gen.ply");
    assert!(sandbench(&["--out", s(&ply), "scan", "import", s(&scan)]).status.success());

    let defects = dir.path().join("defects.json");
    assert!(sandbench(&["--out", s(&defects), "detect", s(&ply)]).status.success());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&defects).unwrap()).unwrap();
    assert!(!report["regions"].as_array().unwrap().is_empty());

    let plan = sandbench(&["plan", s(&ply)]);
    assert!(plan.status.success());
    let plan: serde_json::Value = serde_json::from_slice(&plan.stdout).unwrap();
    let m = &plan["metrics"];
    assert!(m["mae"].as_f64().unwrap() <= m["rmse"].as_f64().unwrap());
    assert!(m["rmse"].as_f64().unwrap() <= m["max"].as_f64().unwrap());

    let sim = dir.path().join("sim");
    assert!(sandbench(&["--out", s(&sim), "simulate", s(&ply), "--force", "5"]).status.success());
    assert!(sim.join("trajectory.csv").is_file());
    let metrics: serde_json::Value = serde_json::from_slice(&fs::read(sim.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["success"], true);
}

#[test]
fn run_with_incomplete_transcript_is_a_stage_failure() {
    let dir = tempfile::tempdir().unwrap();
    let scan = write_scan(dir.path());
    let t = dir.path().join("short.transcript");
    fs::write(&t, "user: sanding\n").unwrap();
    let out = sandbench(&["--out", s(&dir.path().join("runs")), "run", s(&scan), "--transcript", s(&t)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cli_and_api_runs_produce_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let scan = write_scan(dir.path());
    let t = dir.path().join("golden.transcript");
    fs::write(&t, GOLDEN_TRANSCRIPT).unwrap();
    let cli_root = dir.path().join("cli");
    let out = sandbench(&["--out", s(&cli_root), "run", s(&scan), "--transcript", s(&t)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cli_dir = Path::new(String::from_utf8(out.stdout).unwrap().trim()).to_path_buf();
    let cli: RunManifest = serde_json::from_slice(&fs::read(cli_dir.join("manifest.json")).unwrap()).unwrap();

    let api_root = dir.path().join("api");
    let o = std::sync::Arc::new(Orchestrator::open(&api_root).unwrap());
    let app = sandbench::api::router(o.clone());
    let rt = tokio::runtime::Runtime::new().unwrap();
    let id = rt.block_on(async {
        use axum::body::Body;
        use axum::http::Request;
        use http_body_util::BodyExt;
        use tower::ServiceExt;
        let post = |uri: String, body: serde_json::Value| {
            Request::post(uri)
                .header("content-type", "application/json")
                .body(Body::from(body.to_string()))
                .unwrap()
        };
        let resp = app.clone().oneshot(post("/v1/runs".into(), serde_json::json!({ "input": scan }))).await.unwrap();
        let m: serde_json::Value = serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
        let id = m["id"].as_str().unwrap().to_string();
        for a in golden_answers() {
            let resp = app
                .clone()
                .oneshot(post(format!("/v1/runs/{id}/wizard"), serde_json::json!({ "text": a })))
                .await
                .unwrap();
            assert!(resp.status().is_success());
        }
        id
    });

    let api = o.get_run(&id).unwrap();
    assert_ne!(api.id, cli.id);
    assert_eq!(api.outputs, cli.outputs);
    for kind in ArtifactKind::ALL {
        let file = kind.file_name();
        assert_eq!(
            fs::read(cli_dir.join(file)).unwrap(),
            fs::read(o.run_dir(&id).join(file)).unwrap(),
            "{file}"
        );
    }
    // Same snapshot apart from id, timestamp and input location.
    assert_eq!(api.config, RunConfig::default());
    assert_eq!(cli.config, api.config);
    assert_eq!(cli.input.sha256, api.input.sha256);
}
