use std::path::PathBuf;

use thiserror::Error;

use crate::Stage;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("input not found: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("run `{0}` not found")]
    NotFound(String),
    #[error("artifact `{0}` not available")]
    NoArtifact(String),
    #[error("run `{0}` is busy")]
    Conflict(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("stage {stage} failed: {reason}")]
    Stage { stage: Stage, reason: String },
    #[error("artifact {path} does not match its recorded hash")]
    Integrity { path: String },
    /// Error raised by one of the pipeline modules.
    #[error("{0}")]
    Module(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Wizard(#[from] sandbench_wizard::WizardError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl OrchestratorError {
    /// Machine-readable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            Self::MissingInput(_) => "missing_input",
            Self::NotFound(_) => "not_found",
            Self::NoArtifact(_) => "no_artifact",
            Self::Conflict(_) => "conflict",
            Self::Protocol(_) => "protocol_error",
            Self::Stage { .. } => "stage_failed",
            Self::Integrity { .. } => "integrity_error",
            Self::Module(_) => "module_error",
            Self::Config(_) => "invalid_config",
            Self::Wizard(sandbench_wizard::WizardError::Protocol(_)) => "protocol_error",
            Self::Wizard(_) => "wizard_error",
            Self::Io(_) => "io_error",
            Self::Json(_) => "invalid_json",
        }
    }
}

pub type Result<T> = std::result::Result<T, OrchestratorError>;
