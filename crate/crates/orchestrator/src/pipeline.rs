use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use sandbench_control::{
    simulate_execution, tune_gains_default, write_trajectory_csv, ControlMetrics, HeightField,
    PlantConfig, SimulationOutput, WrenchRegion,
};
use sandbench_geometry::io::ply_bytes;
use sandbench_geometry::{load_cloud, CloudFormat, PlyEncoding, PointCloud};
use sandbench_perception::{detect_defects, DefectReport};
use sandbench_planner::{plan_path, PlanOutput};
use sandbench_wizard::{
    format_transcript, ActionDescriptor, ActionResult, Input, Pending, Term, Wizard,
    WizardSession, DEFAULT_KB,
};

use crate::store::{sha256_hex, RunStore, SESSION_FILE};
use crate::{
    ArtifactKind, InputRef, OrchestratorError, Result, RunConfig, RunManifest, Stage,
    StageRecord, StageStatus, WizardRef,
};

/// `meta.source` given to clouds once ingested, so artifacts do not depend on
/// where the run directory lives.
const INGESTED_SOURCE: &str = "cloud.ply";

/// Scan format from a file extension.
pub fn cloud_format(path: &Path) -> Result<CloudFormat> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("ply") => Ok(CloudFormat::Ply),
        Some("xyz") | Some("txt") | Some("asc") => Ok(CloudFormat::XyzAscii),
        _ => Err(OrchestratorError::Config(format!(
            "cannot tell the scan format of {}; use .ply or .xyz",
            path.display()
        ))),
    }
}

/// Run lifecycle over a data directory. The CLI and the HTTP API both go
/// through this type.
#[derive(Debug)]
pub struct Orchestrator {
    store: RunStore,
    wizard: Wizard,
    kb_sha256: String,
}

impl Orchestrator {
    /// Orchestrator with the shipped knowledge base.
    pub fn open(data_dir: impl Into<PathBuf>) -> Result<Orchestrator> {
        Ok(Orchestrator {
            store: RunStore::open(data_dir)?,
            wizard: Wizard::shipped(),
            kb_sha256: sha256_hex(DEFAULT_KB.as_bytes()),
        })
    }

    pub fn store(&self) -> &RunStore {
        &self.store
    }

    pub fn run_dir(&self, id: &str) -> PathBuf {
        self.store.run_dir(id)
    }

    pub fn create_run(&self, input: &Path, config: RunConfig) -> Result<RunManifest> {
        config.validate()?;
        if !input.is_file() {
            return Err(OrchestratorError::MissingInput(input.to_path_buf()));
        }
        cloud_format(input)?;
        let bytes = std::fs::read(input)?;
        let path = std::fs::canonicalize(input)?;

        let id = uuid::Uuid::new_v4().to_string();
        self.store.create_dir(&id)?;
        let (session, _) = self.wizard.start(id.clone())?;
        let mut m = RunManifest {
            id: id.clone(),
            created_at: chrono::Utc::now().to_rfc3339(),
            input: InputRef {
                path: path.display().to_string(),
                sha256: sha256_hex(&bytes),
            },
            config,
            kb_sha256: self.kb_sha256.clone(),
            stages: Stage::ALL.into_iter().map(|s| (s, StageRecord::default())).collect(),
            outputs: BTreeMap::new(),
            wizard: wizard_ref(&session),
        };
        self.persist_session(&mut m, &session)?;
        self.store.save_manifest(&m)?;
        log::info!("created run {id} for {}", m.input.path);
        Ok(m)
    }

    pub fn get_run(&self, id: &str) -> Result<RunManifest> {
        self.store.load_manifest(id)
    }

    pub fn session(&self, id: &str) -> Result<WizardSession> {
        self.store.load_manifest(id)?;
        self.store.load_session(id)
    }

    /// Hash-checked artifact bytes.
    pub fn artifact(&self, id: &str, kind: ArtifactKind) -> Result<Vec<u8>> {
        let m = self.store.load_manifest(id)?;
        self.store.read_artifact(&m, kind)
    }

    /// Applies an optional user answer, then executes pending actions until
    /// the wizard asks a question, finishes, or `max_actions` have run.
    pub fn advance(&self, id: &str, text: Option<&str>, max_actions: Option<usize>) -> Result<RunManifest> {
        let _lock = self.store.lock(id)?;
        let mut m = self.store.load_manifest(id)?;
        let mut session = self.store.load_session(id)?;
        match (&session.pending, text) {
            (Pending::Done, _) => {
                return Err(OrchestratorError::Protocol(format!("run {id} is done")));
            }
            (Pending::Question(_), Some(t)) => {
                let (next, _) = self.wizard.step(&session, Input::User(t.to_string()))?;
                session = next;
                self.persist_session(&mut m, &session)?;
                self.store.save_manifest(&m)?;
            }
            (Pending::Question(q), None) => {
                return Err(OrchestratorError::Protocol(format!("run {id} awaits an answer: {}", q.prompt)));
            }
            (Pending::Action(a), Some(_)) => {
                return Err(OrchestratorError::Protocol(format!(
                    "run {id} awaits the {} action, not a user answer",
                    a.kind
                )));
            }
            (Pending::Action(_), None) => {}
        }

        let mut executed = 0;
        while let Pending::Action(action) = &session.pending {
            if max_actions.is_some_and(|n| executed >= n) {
                break;
            }
            let action = action.clone();
            let result = self.run_action(&mut m, &session, &action)?;
            let (next, _) = self.wizard.step(&session, Input::Result(result))?;
            session = next;
            self.persist_session(&mut m, &session)?;
            self.store.save_manifest(&m)?;
            executed += 1;
        }
        Ok(m)
    }

    /// Result for the pending action: the recorded one when a previous
    /// process finished the stage but died before stepping the wizard,
    /// otherwise a fresh execution.
    fn run_action(&self, m: &mut RunManifest, session: &WizardSession, action: &ActionDescriptor) -> Result<ActionResult> {
        let stage = Stage::for_action(&action.kind)
            .ok_or_else(|| OrchestratorError::Protocol(format!("no stage handles action `{}`", action.kind)))?;
        let seq = session.actions().len();
        let rec = m.stage(stage);
        if rec.action_seq == Some(seq) {
            if let Some(r) = &rec.result {
                log::info!("run {}: reusing recorded result of {stage}", m.id);
                return Ok(r.clone());
            }
        }

        for s in Stage::ALL.into_iter().filter(|s| *s > stage) {
            let r = m.stage_mut(s);
            r.status = StageStatus::Pending;
            r.action_seq = None;
            r.result = None;
        }
        let rec = m.stage_mut(stage);
        rec.status = StageStatus::Running;
        rec.action_seq = Some(seq);
        rec.result = None;
        rec.attempts += 1;
        self.store.save_manifest(m)?;

        match self.execute_stage(m, stage, action) {
            Ok(outcome) => {
                let rec = m.stage_mut(stage);
                rec.status = match outcome.failure {
                    None => StageStatus::Ok,
                    Some(reason) => StageStatus::Failed { reason },
                };
                rec.result = Some(outcome.result.clone());
                self.store.save_manifest(m)?;
                Ok(outcome.result)
            }
            Err(e) => {
                let reason = e.to_string();
                m.stage_mut(stage).status = StageStatus::Failed { reason: reason.clone() };
                self.store.save_manifest(m)?;
                log::warn!("run {}: stage {stage} failed: {reason}", m.id);
                Err(OrchestratorError::Stage { stage, reason })
            }
        }
    }

    fn persist_session(&self, m: &mut RunManifest, s: &WizardSession) -> Result<()> {
        self.store.save_session(&m.id, s)?;
        self.store
            .write_artifact(m, ArtifactKind::Transcript, format_transcript(&s.transcript).as_bytes())?;
        m.wizard = wizard_ref(s);
        Ok(())
    }

    fn load_ingested(&self, m: &RunManifest) -> Result<PointCloud> {
        self.store.read_artifact(m, ArtifactKind::Cloud)?;
        let path = self.store.run_dir(&m.id).join(ArtifactKind::Cloud.file_name());
        let mut cloud = load_cloud(path, CloudFormat::Ply).map_err(stage_err)?;
        cloud.meta.source = INGESTED_SOURCE.to_string();
        Ok(cloud)
    }

    fn load_json<T: serde::de::DeserializeOwned>(&self, m: &RunManifest, kind: ArtifactKind) -> Result<T> {
        Ok(serde_json::from_slice(&self.store.read_artifact(m, kind)?)?)
    }

    fn execute_stage(&self, m: &mut RunManifest, stage: Stage, action: &ActionDescriptor) -> Result<Outcome> {
        let kind = action.kind.as_str();
        match stage {
            Stage::ScanIngest => {
                let input = Path::new(&m.input.path);
                let bytes = std::fs::read(input).map_err(|_| OrchestratorError::MissingInput(input.to_path_buf()))?;
                if sha256_hex(&bytes) != m.input.sha256 {
                    return Err(OrchestratorError::Integrity { path: m.input.path.clone() });
                }
                let cloud = load_cloud(input, cloud_format(input)?).map_err(stage_err)?;
                let out = ply_bytes(&cloud, PlyEncoding::BinaryLittleEndian);
                self.store.write_artifact(m, ArtifactKind::Cloud, &out)?;
                Ok(Outcome::ok(ActionResult::ok(kind)))
            }
            Stage::DefectDetect => {
                let cloud = self.load_ingested(m)?;
                let report = detect_defects(&cloud, &m.config.perception).map_err(stage_err)?;
                self.store.write_artifact(m, ArtifactKind::Defects, &pretty(&report)?)?;
                Ok(Outcome::ok(ActionResult::ok(kind)))
            }
            Stage::Plan => {
                let cloud = self.load_ingested(m)?;
                let plan = plan_path(&cloud, &m.config.planner).map_err(stage_err)?;
                self.store.write_artifact(m, ArtifactKind::Path, &pretty(&plan)?)?;
                Ok(Outcome::ok(ActionResult::ok(kind)))
            }
            Stage::Simulate => {
                let plant = m.config.simulation_plant();
                let out = self.simulate(m, action, &plant)?;
                let csv = trajectory_csv(&out)?;
                self.store.write_artifact(m, ArtifactKind::SimulationTrajectory, &csv)?;
                self.store.write_artifact(m, ArtifactKind::SimulationMetrics, &pretty(&out.metrics)?)?;
                Ok(Outcome::from_metrics(kind, &out.metrics))
            }
            Stage::Validate => {
                let sim: ControlMetrics = self.load_json(m, ArtifactKind::SimulationMetrics)?;
                let plan: PlanOutput = self.load_json(m, ArtifactKind::Path)?;
                let defects: DefectReport = self.load_json(m, ArtifactKind::Defects)?;
                let summary = ValidationSummary {
                    simulation: sim,
                    alignment: plan.metrics,
                    waypoints: plan.path.waypoints.len(),
                    defect_regions: defects.regions.len(),
                };
                self.store.write_artifact(m, ArtifactKind::Validation, &pretty(&summary)?)?;
                Ok(Outcome::ok(ActionResult::ok(kind)))
            }
            Stage::Execute => {
                let plant = m.config.execution_plant();
                let out = self.simulate(m, action, &plant)?;
                let csv = trajectory_csv(&out)?;
                self.store.write_artifact(m, ArtifactKind::Trajectory, &csv)?;
                self.store.write_artifact(m, ArtifactKind::Metrics, &pretty(&out.metrics)?)?;
                Ok(Outcome::from_metrics(kind, &out.metrics))
            }
            Stage::Qc => {
                let exec: ControlMetrics = self.load_json(m, ArtifactKind::Metrics)?;
                let report = QcReport {
                    execution: exec,
                    passes_remaining: action.params.get("passes_remaining").and_then(Term::as_f64),
                };
                self.store.write_artifact(m, ArtifactKind::Qc, &pretty(&report)?)?;
                Ok(Outcome::ok(ActionResult::ok(kind)))
            }
        }
    }

    fn simulate(&self, m: &RunManifest, action: &ActionDescriptor, plant: &PlantConfig) -> Result<SimulationOutput> {
        let force = action
            .params
            .get("force")
            .and_then(Term::as_f64)
            .ok_or_else(|| OrchestratorError::Protocol(format!("{} action lacks a force", action.kind)))?;
        let cloud = self.load_ingested(m)?;
        let plan: PlanOutput = self.load_json(m, ArtifactKind::Path)?;
        let surface = HeightField::from_cloud(&cloud, &plan.frame, m.config.heightfield_cell).map_err(stage_err)?;
        let region = WrenchRegion::normal_force(force).map_err(stage_err)?;
        let gains = tune_gains_default(plant);
        simulate_execution(&plan.path, &surface, &region, &gains, plant, m.config.seed).map_err(stage_err)
    }
}

#[derive(Serialize)]
struct ValidationSummary {
    simulation: ControlMetrics,
    alignment: sandbench_planner::AlignmentMetrics,
    waypoints: usize,
    defect_regions: usize,
}

#[derive(Serialize)]
struct QcReport {
    /// Advisory only; approval is the user's decision.
    execution: ControlMetrics,
    passes_remaining: Option<f64>,
}

struct Outcome {
    result: ActionResult,
    /// Domain failure reported to the wizard as `ok = false`.
    failure: Option<String>,
}

impl Outcome {
    fn ok(result: ActionResult) -> Outcome {
        Outcome { result, failure: None }
    }

    fn from_metrics(kind: &str, metrics: &ControlMetrics) -> Outcome {
        let mut result = if metrics.success { ActionResult::ok(kind) } else { ActionResult::failed(kind) };
        if let Some(mae) = metrics.mae {
            result = result.with_fact("force_mae", Term::quantity(mae, "N"));
        }
        let failure = metrics.failure.map(|f| {
            format!(
                "{} at t = {:.3} s ({:.2} N)",
                serde_json::to_value(f.reason).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                f.t,
                f.force
            )
        });
        let failure = match (metrics.success, failure) {
            (true, _) => None,
            (false, Some(r)) => Some(r),
            (false, None) => Some("simulation failed".to_string()),
        };
        Outcome { result, failure }
    }
}

fn wizard_ref(s: &WizardSession) -> WizardRef {
    WizardRef {
        session: SESSION_FILE.to_string(),
        status: s.status(),
        prompt: match &s.pending {
            Pending::Question(q) => Some(q.prompt.clone()),
            _ => None,
        },
        action: match &s.pending {
            Pending::Action(a) => Some(a.kind.clone()),
            _ => None,
        },
    }
}

fn stage_err(e: impl std::fmt::Display) -> OrchestratorError {
    OrchestratorError::Module(e.to_string())
}

fn pretty<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn trajectory_csv(out: &SimulationOutput) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_trajectory_csv(&out.trajectory, &mut buf).map_err(stage_err)?;
    Ok(buf)
}
