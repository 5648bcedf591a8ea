use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};

use sandbench_wizard::WizardSession;

use crate::{ArtifactKind, ArtifactRef, OrchestratorError, Result, RunManifest};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SESSION_FILE: &str = "wizard.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` next to `path` and renames it into place, so readers see
/// either the old or the new content.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = dir.join(format!(".{name}.{}.tmp", uuid::Uuid::new_v4().simple()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    if let Ok(d) = fs::File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

/// Run directories under one data directory, plus the set of runs currently
/// being advanced by this process.
#[derive(Debug)]
pub struct RunStore {
    root: PathBuf,
    busy: Arc<Mutex<HashSet<String>>>,
}

/// Held while a run is advanced; releases the run on drop.
#[derive(Debug)]
pub struct RunLock {
    id: String,
    busy: Arc<Mutex<HashSet<String>>>,
}

impl Drop for RunLock {
    fn drop(&mut self) {
        self.busy.lock().unwrap_or_else(|e| e.into_inner()).remove(&self.id);
    }
}

impl RunStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<RunStore> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(RunStore {
            root,
            busy: Arc::default(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    fn check_id(id: &str) -> Result<()> {
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(OrchestratorError::NotFound(id.to_string()));
        }
        Ok(())
    }

    pub fn exists(&self, id: &str) -> bool {
        Self::check_id(id).is_ok() && self.run_dir(id).join(MANIFEST_FILE).is_file()
    }

    /// Fails with `Conflict` if the run is already locked.
    pub fn lock(&self, id: &str) -> Result<RunLock> {
        let mut busy = self.busy.lock().unwrap_or_else(|e| e.into_inner());
        if !busy.insert(id.to_string()) {
            return Err(OrchestratorError::Conflict(id.to_string()));
        }
        Ok(RunLock {
            id: id.to_string(),
            busy: self.busy.clone(),
        })
    }

    pub fn create_dir(&self, id: &str) -> Result<()> {
        Self::check_id(id)?;
        fs::create_dir(self.run_dir(id))?;
        Ok(())
    }

    pub fn load_manifest(&self, id: &str) -> Result<RunManifest> {
        if !self.exists(id) {
            return Err(OrchestratorError::NotFound(id.to_string()));
        }
        let bytes = fs::read(self.run_dir(id).join(MANIFEST_FILE))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn save_manifest(&self, m: &RunManifest) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(m)?;
        bytes.push(b'\n');
        write_atomic(&self.run_dir(&m.id).join(MANIFEST_FILE), &bytes)
    }

    pub fn load_session(&self, id: &str) -> Result<WizardSession> {
        let bytes = fs::read(self.run_dir(id).join(SESSION_FILE))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn save_session(&self, id: &str, s: &WizardSession) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(s)?;
        bytes.push(b'\n');
        write_atomic(&self.run_dir(id).join(SESSION_FILE), &bytes)
    }

    /// Writes an artifact and records its hash in the manifest. The manifest
    /// itself is not saved.
    pub fn write_artifact(&self, m: &mut RunManifest, kind: ArtifactKind, bytes: &[u8]) -> Result<ArtifactRef> {
        let file = kind.file_name();
        write_atomic(&self.run_dir(&m.id).join(file), bytes)?;
        let r = ArtifactRef {
            file: file.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        };
        m.outputs.insert(kind, r.clone());
        Ok(r)
    }

    /// Reads an artifact recorded in the manifest and verifies its hash.
    pub fn read_artifact(&self, m: &RunManifest, kind: ArtifactKind) -> Result<Vec<u8>> {
        let r = m
            .outputs
            .get(&kind)
            .ok_or_else(|| OrchestratorError::NoArtifact(kind.name().to_string()))?;
        let bytes = fs::read(self.run_dir(&m.id).join(&r.file))?;
        if sha256_hex(&bytes) != r.sha256 {
            return Err(OrchestratorError::Integrity { path: r.file.clone() });
        }
        Ok(bytes)
    }
}
