use serde::{Deserialize, Serialize};

use sandbench_planner::SegmentKind;

use crate::{ControlError, Failure, Result, Trajectory, WrenchRegion};

/// Force tracking along tool z over contact samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlMetrics {
    pub setpoint: f64,
    /// Mean |Fz − setpoint| from the rise onwards; `None` without a rise.
    pub mae: Option<f64>,
    /// Max |Fz − setpoint| once the setpoint itself was reached.
    pub max_after_rise: Option<f64>,
    /// Time from the first contact sample until Fz reaches 90 % of the
    /// setpoint.
    pub rise_time: Option<f64>,
    pub contact_samples: usize,
    pub success: bool,
    pub failure: Option<Failure>,
}

pub fn control_metrics(traj: &Trajectory, region: &WrenchRegion) -> Result<ControlMetrics> {
    if traj.samples.is_empty() {
        return Err(ControlError::EmptyTrajectory);
    }
    let setpoint = region.setpoint_z();
    let contact: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| s.kind == SegmentKind::Contact)
        .map(|s| (s.t, s.wrench[2]))
        .collect();

    let rise = contact.iter().position(|&(_, f)| f >= 0.9 * setpoint);
    let reached = contact.iter().position(|&(_, f)| f >= setpoint);
    let mae = rise.map(|i| {
        let tail = &contact[i..];
        tail.iter().map(|&(_, f)| (f - setpoint).abs()).sum::<f64>() / tail.len() as f64
    });
    let max_after_rise = reached.map(|i| {
        contact[i..]
            .iter()
            .map(|&(_, f)| (f - setpoint).abs())
            .fold(0.0, f64::max)
    });
    Ok(ControlMetrics {
        setpoint,
        mae,
        max_after_rise,
        rise_time: rise.map(|i| contact[i].0 - contact[0].0),
        contact_samples: contact.len(),
        success: traj.success,
        failure: traj.failure,
    })
}
