//! Run lifecycle for the surface-treatment pipeline: one directory per run
//! holding a manifest, the wizard session and hash-checked artifacts, driven
//! either from the command line or over HTTP.

pub mod api;
mod config;
mod error;
mod manifest;
mod pipeline;
pub mod store;

pub use config::{ExecutionDisturbance, RunConfig};
pub use error::{OrchestratorError, Result};
pub use manifest::{
    ArtifactKind, ArtifactRef, InputRef, RunManifest, Stage, StageRecord, StageStatus, WizardRef,
};
pub use pipeline::{cloud_format, Orchestrator};
