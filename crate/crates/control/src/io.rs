use std::io::Write;

use crate::{Result, Trajectory};

pub const TRAJECTORY_COLUMNS: [&str; 41] = [
    "t", "kind", "px", "py", "pz", "qw", "qx", "qy", "qz", "ax", "ay", "az", "fx", "fy", "fz",
    "tx", "ty", "tz", "ex", "ey", "ez", "etx", "ety", "etz", "upose_x", "upose_y", "upose_z",
    "upose_rx", "upose_ry", "upose_rz", "uwrench_x", "uwrench_y", "uwrench_z", "uwrench_rx",
    "uwrench_ry", "uwrench_rz", "outside_surface", "success", "reason", "abort_t",
    "abort_force",
];

/// Columnar CSV, one row per sample. Abort details repeat on every row so
/// each row is self-contained.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_COLUMNS)?;
    let reason = traj
        .failure
        .map(|f| format!("{:?}", f.reason))
        .unwrap_or_default();
    let abort_t = traj.failure.map(|f| f.t.to_string()).unwrap_or_default();
    let abort_force = traj.failure.map(|f| f.force.to_string()).unwrap_or_default();
    for s in &traj.samples {
        let q = s.commanded_orientation.quaternion();
        let mut row: Vec<String> = Vec::with_capacity(TRAJECTORY_COLUMNS.len());
        row.push(s.t.to_string());
        row.push(format!("{:?}", s.kind).to_lowercase());
        let numbers = [s.commanded_position.x, s.commanded_position.y, s.commanded_position.z]
            .into_iter()
            .chain([q.w, q.i, q.j, q.k])
            .chain([s.actual_position.x, s.actual_position.y, s.actual_position.z])
            .chain(s.wrench.iter().copied())
            .chain(s.error.iter().copied())
            .chain(s.u_pose.iter().copied())
            .chain(s.u_wrench.iter().copied());
        row.extend(numbers.map(|v| v.to_string()));
        row.push(s.outside_surface.to_string());
        row.push(traj.success.to_string());
        row.push(reason.clone());
        row.push(abort_t.clone());
        row.push(abort_force.clone());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
