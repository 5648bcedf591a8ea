#![allow(dead_code)]

use std::path::{Path, PathBuf};

use sandbench::{Orchestrator, Result, RunManifest};
use sandbench_geometry::{save_ply, PlyEncoding};
use sandbench_perception::{make_synthetic_scan, DefectSeed, SyntheticScanSpec};
use sandbench_wizard::{parse_transcript, Speaker, Status, GOLDEN_TRANSCRIPT};

/// Small cylinder-patch scan with one dent, written as binary PLY.
pub fn write_scan(dir: &Path) -> PathBuf {
    let mut spec = SyntheticScanSpec::cylinder(2.0, [0.1, 0.14], 2e-3);
    spec.noise_sigma = 2e-5;
    spec.defects = vec![DefectSeed {
        center: [0.0, 0.01],
        radius: 8e-3,
        depth: -0.8e-3,
    }];
    spec.seed = 7;
    let scan = make_synthetic_scan(&spec).unwrap();
    let path = dir.join("scan.ply");
    save_ply(&scan.cloud, &path, PlyEncoding::BinaryLittleEndian).unwrap();
    path
}

/// User turns of the shipped golden transcript.
pub fn golden_answers() -> Vec<String> {
    parse_transcript(GOLDEN_TRANSCRIPT)
        .unwrap()
        .into_iter()
        .filter(|t| t.speaker == Speaker::User)
        .map(|t| t.text)
        .collect()
}

/// Answers questions from `answers` and executes actions, at most
/// `per_call` per advance, until done or out of answers. With `Some(0)` it
/// stops at the first pending action.
pub fn drive(o: &Orchestrator, id: &str, answers: &mut impl Iterator<Item = String>, per_call: Option<usize>) -> Result<RunManifest> {
    let mut m = o.get_run(id)?;
    loop {
        m = match m.wizard.status {
            Status::Done => return Ok(m),
            Status::AwaitingAction if per_call == Some(0) => return Ok(m),
            Status::AwaitingAction => o.advance(id, None, per_call)?,
            Status::AwaitingUser => match answers.next() {
                Some(a) => o.advance(id, Some(&a), per_call)?,
                None => return Ok(m),
            },
        };
    }
}
