mod common;

use std::fs;

use common::{drive, golden_answers, write_scan};
use sandbench::{ArtifactKind, Orchestrator, OrchestratorError, RunConfig, Stage, StageStatus};
use sandbench_wizard::{parse_transcript, Speaker, Status, GOLDEN_TRANSCRIPT};

fn setup() -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let scan = write_scan(dir.path());
    (dir, scan)
}

#[test]
fn create_has_seven_pending_stages() {
    let (dir, scan) = setup();
    let o = Orchestrator::open(dir.path().join("runs")).unwrap();
    let m = o.create_run(&scan, RunConfig::default()).unwrap();
    let names: Vec<String> = m.stages.keys().map(|s| s.to_string()).collect();
    assert_eq!(names, ["scan-ingest", "defect-detect", "plan", "simulate", "validate", "execute", "qc"]);
    assert!(m.stages.values().all(|r| r.status == StageStatus::Pending));
    assert_eq!(m.wizard.status, Status::AwaitingUser);
    assert!(o.run_dir(&m.id).join("manifest.json").is_file());
    m.check().unwrap();
    assert_eq!(o.get_run(&m.id).unwrap(), m);
}

#[test]
fn create_rejects_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    let o = Orchestrator::open(dir.path()).unwrap();
    let err = o.create_run(&dir.path().join("absent.ply"), RunConfig::default()).unwrap_err();
    assert!(matches!(err, OrchestratorError::MissingInput(_)), "{err}");
    assert_eq!(err.code(), "missing_input");
}

#[test]
fn creates_get_distinct_ids() {
    let (dir, scan) = setup();
    let o = Orchestrator::open(dir.path().join("runs")).unwrap();
    let a = o.create_run(&scan, RunConfig::default()).unwrap();
    let b = o.create_run(&scan, RunConfig::default()).unwrap();
    assert_ne!(a.id, b.id);
    assert_eq!(uuid::Uuid::parse_str(&a.id).unwrap().get_version_num(), 4);
}

#[test]
fn unknown_run_is_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let o = Orchestrator::open(dir.path()).unwrap();
    assert!(matches!(o.get_run("nope"), Err(OrchestratorError::NotFound(_))));
    assert!(matches!(o.get_run("../etc"), Err(OrchestratorError::NotFound(_))));
    assert!(matches!(o.advance("nope", None, None), Err(OrchestratorError::NotFound(_))));
}

#[test]
fn golden_answers_complete_every_stage() {
    let (dir, scan) = setup();
    let o = Orchestrator::open(dir.path().join("runs")).unwrap();
    let m = o.create_run(&scan, RunConfig::default()).unwrap();
    let m = drive(&o, &m.id, &mut golden_answers().into_iter(), None).unwrap();
    assert_eq!(m.wizard.status, Status::Done);
    for s in Stage::ALL {
        assert_eq!(m.stage(s).status, StageStatus::Ok, "{s}");
        assert_eq!(m.stage(s).attempts, 1, "{s}");
    }
    m.check().unwrap();

    let expected: Vec<String> = parse_transcript(GOLDEN_TRANSCRIPT)
        .unwrap()
        .into_iter()
        .filter(|t| t.speaker == Speaker::Action)
        .map(|t| t.text.split(' ').next().unwrap().to_string())
        .collect();
    assert_eq!(o.session(&m.id).unwrap().actions(), expected);

    // Every recorded artifact is present and hash-checked.
    for kind in ArtifactKind::ALL {
        let bytes = o.artifact(&m.id, kind).unwrap();
        assert_eq!(bytes.len() as u64, m.outputs[&kind].bytes, "{}", kind.name());
    }
    let transcript = String::from_utf8(o.artifact(&m.id, ArtifactKind::Transcript).unwrap()).unwrap();
    assert!(transcript.ends_with("wizard: All steps are complete.\n"));
    let metrics: serde_json::Value = serde_json::from_slice(&o.artifact(&m.id, ArtifactKind::Metrics).unwrap()).unwrap();
    assert_eq!(metrics["success"], true);
}

#[test]
fn advancing_a_done_run_is_a_protocol_error() {
    let (dir, scan) = setup();
    let o = Orchestrator::open(dir.path().join("runs")).unwrap();
    let m = o.create_run(&scan, RunConfig::default()).unwrap();
    drive(&o, &m.id, &mut golden_answers().into_iter(), None).unwrap();
    let err = o.advance(&m.id, None, None).unwrap_err();
    assert!(matches!(err, OrchestratorError::Protocol(_)), "{err}");
    assert!(matches!(o.advance(&m.id, Some("yes"), None), Err(OrchestratorError::Protocol(_))));
}

#[test]
fn answers_and_actions_must_match_the_pending_turn() {
    let (dir, scan) = setup();
    let o = Orchestrator::open(dir.path().join("runs")).unwrap();
    let m = o.create_run(&scan, RunConfig::default()).unwrap();
    assert!(matches!(o.advance(&m.id, None, None), Err(OrchestratorError::Protocol(_))));
    let answers = golden_answers();
    let mut it = answers.into_iter().take(6);
    let m = drive(&o, &m.id, &mut it, Some(0)).unwrap();
    assert_eq!(m.wizard.status, Status::AwaitingAction);
    assert!(matches!(o.advance(&m.id, Some("5 N"), None), Err(OrchestratorError::Protocol(_))));
}

#[test]
fn force_limit_abort_fails_simulate_and_asks_for_a_new_force() {
    let (dir, scan) = setup();
    let o = Orchestrator::open(dir.path().join("runs")).unwrap();
    let mut cfg = RunConfig::default();
    cfg.plant.force_limit = 4.0;
    let m = o.create_run(&scan, cfg).unwrap();
    let m = drive(&o, &m.id, &mut golden_answers().into_iter().take(6), None).unwrap();

    let StageStatus::Failed { reason } = &m.stage(Stage::Simulate).status else {
        panic!("simulate not failed: {:?}", m.stage(Stage::Simulate));
    };
    assert!(reason.contains("force-limit-exceeded"), "{reason}");
    assert_eq!(m.stage(Stage::Simulate).result.as_ref().map(|r| r.ok), Some(false));
    assert_eq!(m.stage(Stage::Plan).status, StageStatus::Ok);
    assert_eq!(m.stage(Stage::Validate).status, StageStatus::Pending);
    assert_eq!(m.wizard.status, Status::AwaitingUser);
    assert_eq!(m.wizard.prompt.as_deref(), Some("Which contact force should the tool apply?"));
    m.check().unwrap();

    // A new force reruns the simulation only.
    let m = o.advance(&m.id, Some("2 N"), Some(1)).unwrap();
    assert_eq!(m.stage(Stage::Simulate).attempts, 2);
    assert_eq!(m.stage(Stage::Plan).attempts, 1);
}

#[test]
fn module_failure_marks_the_stage_and_stays_resumable() {
    let dir = tempfile::tempdir().unwrap();
    // Three collinear points: nothing to detect defects on.
    let scan = dir.path().join("line.xyz");
    fs::write(&scan, "0 0 0 0\n1 0 0 0\n2 0 0 0\n").unwrap();
    let o = Orchestrator::open(dir.path().join("runs")).unwrap();
    let m = o.create_run(&scan, RunConfig::default()).unwrap();
    let err = drive(&o, &m.id, &mut golden_answers().into_iter().take(6), None).unwrap_err();
    let OrchestratorError::Stage { stage, .. } = err else { panic!("{err}") };
    let m = o.get_run(&m.id).unwrap();
    assert!(matches!(m.stage(stage).status, StageStatus::Failed { .. }));
    assert_eq!(m.wizard.status, Status::AwaitingAction);
    m.check().unwrap();
    // Retrying runs the same stage again and fails the same way.
    assert!(matches!(o.advance(&m.id, None, None), Err(OrchestratorError::Stage { stage: s, .. }) if s == stage));
    assert_eq!(o.get_run(&m.id).unwrap().stage(stage).attempts, 2);
}

#[test]
fn crash_between_any_two_stages_resumes_without_repeats() {
    let (dir, scan) = setup();
    let root = dir.path().join("runs");
    for stop in 1..=7 {
        let (id, rest) = {
            let o = Orchestrator::open(&root).unwrap();
            let m = o.create_run(&scan, RunConfig::default()).unwrap();
            let mut answers = golden_answers().into_iter();
            let mut m = drive(&o, &m.id, &mut answers.by_ref().take(6), Some(0)).unwrap();
            for _ in 0..stop {
                if m.wizard.status != Status::AwaitingAction {
                    m = o.advance(&m.id, answers.next().as_deref(), Some(0)).unwrap();
                }
                m = o.advance(&m.id, None, Some(1)).unwrap();
            }
            (m.id, answers.collect::<Vec<_>>())
            // The orchestrator is dropped here, as by a killed process.
        };
        let o = Orchestrator::open(&root).unwrap();
        let before = o.get_run(&id).unwrap();
        before.check().unwrap();
        let ok_before = before.stages.values().filter(|r| r.status == StageStatus::Ok).count();
        assert_eq!(ok_before, stop, "stop after {stop}");

        let m = drive(&o, &id, &mut rest.into_iter(), None).unwrap();
        assert_eq!(m.wizard.status, Status::Done, "stop after {stop}");
        for s in Stage::ALL {
            assert_eq!(m.stage(s).status, StageStatus::Ok);
            assert_eq!(m.stage(s).attempts, 1, "{s} repeated after stop {stop}");
        }
    }
}

#[test]
fn recorded_result_is_reused_when_the_wizard_was_not_stepped() {
    let (dir, scan) = setup();
    let o = Orchestrator::open(dir.path().join("runs")).unwrap();
    let m = o.create_run(&scan, RunConfig::default()).unwrap();
    let m = drive(&o, &m.id, &mut golden_answers().into_iter().take(6), Some(0)).unwrap();
    let m = o.advance(&m.id, None, Some(1)).unwrap();
    assert_eq!(m.stage(Stage::ScanIngest).status, StageStatus::Ok);
    let run = o.run_dir(&m.id);
    let session_before = fs::read(run.join("wizard.json")).unwrap();

    // The detect stage completes, then the wizard step is lost.
    let after = o.advance(&m.id, None, Some(1)).unwrap();
    assert_eq!(after.stage(Stage::DefectDetect).status, StageStatus::Ok);
    let defects = fs::read(run.join("defects.json")).unwrap();
    fs::write(run.join("wizard.json"), session_before).unwrap();

    let resumed = o.advance(&m.id, None, Some(1)).unwrap();
    assert_eq!(resumed.stage(Stage::DefectDetect).attempts, 1);
    assert_eq!(resumed.stage(Stage::Plan).status, StageStatus::Pending);
    assert_eq!(fs::read(run.join("defects.json")).unwrap(), defects);
    assert_eq!(resumed.wizard.action.as_deref(), Some("plan"));
}

#[test]
fn interrupted_running_stage_is_rerun() {
    let (dir, scan) = setup();
    let o = Orchestrator::open(dir.path().join("runs")).unwrap();
    let m = o.create_run(&scan, RunConfig::default()).unwrap();
    let m = drive(&o, &m.id, &mut golden_answers().into_iter().take(6), Some(0)).unwrap();
    let path = o.run_dir(&m.id).join("manifest.json");
    let mut raw: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    raw["stages"]["scan-ingest"] = serde_json::json!({
        "status": {"state": "running"}, "action_seq": 1, "result": null, "attempts": 1
    });
    fs::write(&path, serde_json::to_vec(&raw).unwrap()).unwrap();

    let m = o.advance(&m.id, None, Some(1)).unwrap();
    assert_eq!(m.stage(Stage::ScanIngest).status, StageStatus::Ok);
    assert_eq!(m.stage(Stage::ScanIngest).attempts, 2);
}

#[test]
fn tampered_artifact_fails_the_integrity_check() {
    let (dir, scan) = setup();
    let o = Orchestrator::open(dir.path().join("runs")).unwrap();
    let m = o.create_run(&scan, RunConfig::default()).unwrap();
    let m = drive(&o, &m.id, &mut golden_answers().into_iter().take(6), Some(0)).unwrap();
    let m = o.advance(&m.id, None, Some(1)).unwrap();
    let cloud = o.run_dir(&m.id).join("cloud.ply");
    let mut bytes = fs::read(&cloud).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0xff;
    fs::write(&cloud, bytes).unwrap();
    assert!(matches!(o.artifact(&m.id, ArtifactKind::Cloud), Err(OrchestratorError::Integrity { .. })));
    // The next stage reads the cloud and refuses it.
    assert!(matches!(o.advance(&m.id, None, Some(1)), Err(OrchestratorError::Stage { stage: Stage::DefectDetect, .. })));
    assert!(matches!(o.artifact(&m.id, ArtifactKind::Trajectory), Err(OrchestratorError::NoArtifact(_))));
}

#[test]
fn same_inputs_give_identical_artifacts() {
    let (dir, scan) = setup();
    let run = |sub: &str| {
        let o = Orchestrator::open(dir.path().join(sub)).unwrap();
        let m = o.create_run(&scan, RunConfig::default()).unwrap();
        let m = drive(&o, &m.id, &mut golden_answers().into_iter(), None).unwrap();
        (o, m)
    };
    let (oa, a) = run("a");
    let (ob, b) = run("b");
    assert_ne!(a.id, b.id);
    assert_eq!(a.outputs, b.outputs);
    for kind in ArtifactKind::ALL {
        assert_eq!(oa.artifact(&a.id, kind).unwrap(), ob.artifact(&b.id, kind).unwrap(), "{}", kind.name());
    }
}

#[test]
fn config_is_validated_and_snapshotted() {
    let (dir, scan) = setup();
    let o = Orchestrator::open(dir.path().join("runs")).unwrap();
    let mut cfg = RunConfig::default();
    cfg.heightfield_cell = 0.0;
    assert!(matches!(o.create_run(&scan, cfg), Err(OrchestratorError::Config(_))));

    let path = dir.path().join("cfg.json");
    fs::write(&path, r#"{"seed": 11, "execution": {"sensor_noise": 0.1}}"#).unwrap();
    let cfg = RunConfig::load(&path).unwrap();
    assert_eq!(cfg.seed, 11);
    assert_eq!(cfg.execution.vibration.amplitude, 1e-3);
    let m = o.create_run(&scan, cfg.clone()).unwrap();
    assert_eq!(m.config, cfg);
    assert_eq!(m.kb_sha256.len(), 64);
}
