use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use sandbench_wizard::{ActionResult, Status};

use crate::{OrchestratorError, Result, RunConfig};

/// Pipeline stages in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    ScanIngest,
    DefectDetect,
    Plan,
    Simulate,
    Validate,
    Execute,
    Qc,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::ScanIngest,
        Stage::DefectDetect,
        Stage::Plan,
        Stage::Simulate,
        Stage::Validate,
        Stage::Execute,
        Stage::Qc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::ScanIngest => "scan-ingest",
            Stage::DefectDetect => "defect-detect",
            Stage::Plan => "plan",
            Stage::Simulate => "simulate",
            Stage::Validate => "validate",
            Stage::Execute => "execute",
            Stage::Qc => "qc",
        }
    }

    /// Stage run by a wizard action kind.
    pub fn for_action(kind: &str) -> Option<Stage> {
        Some(match kind {
            "scan" => Stage::ScanIngest,
            "detect" => Stage::DefectDetect,
            "plan" => Stage::Plan,
            "simulate" => Stage::Simulate,
            "validate" => Stage::Validate,
            "execute" => Stage::Execute,
            "qc" => Stage::Qc,
            _ => return None,
        })
    }

    /// Stages that must be ok before this one may be.
    pub fn upstream(self) -> &'static [Stage] {
        let i = Stage::ALL.iter().position(|s| *s == self).expect("listed");
        &Stage::ALL[..i]
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum StageStatus {
    Pending,
    Running,
    Ok,
    Failed { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub status: StageStatus,
    /// Position of the wizard action this record belongs to (1-based).
    pub action_seq: Option<usize>,
    /// Result fed back to the wizard, kept so a restart does not rerun the
    /// stage.
    pub result: Option<ActionResult>,
    pub attempts: u32,
}

impl Default for StageRecord {
    fn default() -> Self {
        StageRecord {
            status: StageStatus::Pending,
            action_seq: None,
            result: None,
            attempts: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArtifactKind {
    Cloud,
    Defects,
    Path,
    SimulationTrajectory,
    SimulationMetrics,
    Validation,
    Trajectory,
    Metrics,
    Qc,
    Transcript,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 10] = [
        ArtifactKind::Cloud,
        ArtifactKind::Defects,
        ArtifactKind::Path,
        ArtifactKind::SimulationTrajectory,
        ArtifactKind::SimulationMetrics,
        ArtifactKind::Validation,
        ArtifactKind::Trajectory,
        ArtifactKind::Metrics,
        ArtifactKind::Qc,
        ArtifactKind::Transcript,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArtifactKind::Cloud => "cloud",
            ArtifactKind::Defects => "defects",
            ArtifactKind::Path => "path",
            ArtifactKind::SimulationTrajectory => "simulation-trajectory",
            ArtifactKind::SimulationMetrics => "simulation-metrics",
            ArtifactKind::Validation => "validation",
            ArtifactKind::Trajectory => "trajectory",
            ArtifactKind::Metrics => "metrics",
            ArtifactKind::Qc => "qc",
            ArtifactKind::Transcript => "transcript",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            ArtifactKind::Cloud => "cloud.ply",
            ArtifactKind::Defects => "defects.json",
            ArtifactKind::Path => "path.json",
            ArtifactKind::SimulationTrajectory => "simulation.csv",
            ArtifactKind::SimulationMetrics => "simulation-metrics.json",
            ArtifactKind::Validation => "validation.json",
            ArtifactKind::Trajectory => "trajectory.csv",
            ArtifactKind::Metrics => "metrics.json",
            ArtifactKind::Qc => "qc.json",
            ArtifactKind::Transcript => "transcript.txt",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            ArtifactKind::Cloud => "application/octet-stream",
            ArtifactKind::SimulationTrajectory | ArtifactKind::Trajectory => "text/csv",
            ArtifactKind::Transcript => "text/plain; charset=utf-8",
            _ => "application/json",
        }
    }

    pub fn parse(name: &str) -> Option<ArtifactKind> {
        ArtifactKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRef {
    /// Relative to the run directory.
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WizardRef {
    /// Session file, relative to the run directory.
    pub session: String,
    pub status: Status,
    /// Question awaiting an answer.
    pub prompt: Option<String>,
    /// Action kind awaiting execution.
    pub action: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub id: String,
    pub created_at: String,
    pub input: InputRef,
    pub config: RunConfig,
    pub kb_sha256: String,
    pub stages: BTreeMap<Stage, StageRecord>,
    pub outputs: BTreeMap<ArtifactKind, ArtifactRef>,
    pub wizard: WizardRef,
}

impl RunManifest {
    pub fn stage(&self, s: Stage) -> &StageRecord {
        &self.stages[&s]
    }

    pub(crate) fn stage_mut(&mut self, s: Stage) -> &mut StageRecord {
        self.stages.entry(s).or_default()
    }

    /// Structural invariants: every stage present, and ok only downstream of
    /// ok stages.
    pub fn check(&self) -> Result<()> {
        for s in Stage::ALL {
            let Some(rec) = self.stages.get(&s) else {
                return Err(OrchestratorError::Protocol(format!("manifest lacks stage {s}")));
            };
            if rec.status == StageStatus::Ok {
                if let Some(up) = s.upstream().iter().find(|u| self.stage(**u).status != StageStatus::Ok) {
                    return Err(OrchestratorError::Protocol(format!("stage {s} is ok but upstream {up} is not")));
                }
            }
        }
        Ok(())
    }
}
