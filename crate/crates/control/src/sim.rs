use nalgebra::UnitQuaternion;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use sandbench_geometry::{distance, Point3, Vector3};
use sandbench_planner::{SegmentKind, ToolPath, Waypoint};

use crate::{
    contact_force, control_metrics, penetration, pid_step, wrench_region_error, ControlError,
    ControlMetrics, HeightField, PidGains, PidState, PlantConfig, Result, Wrench, WrenchRegion,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    ForceLimitExceeded,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub reason: FailureReason,
    pub t: f64,
    /// Largest translational force component at the abort, N.
    pub force: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub kind: SegmentKind,
    pub commanded_position: Point3,
    pub commanded_orientation: UnitQuaternion<f64>,
    pub actual_position: Point3,
    pub wrench: Wrench,
    pub error: Wrench,
    /// Deviation of the planned pose from the previous actual pose, so that
    /// `commanded = previous actual + u_pose + accumulated wrench offset`.
    pub u_pose: Wrench,
    pub u_wrench: Wrench,
    pub outside_surface: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub timestep: f64,
    pub samples: Vec<TrajectorySample>,
    pub success: bool,
    pub failure: Option<Failure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutput {
    pub trajectory: Trajectory,
    pub metrics: ControlMetrics,
}

/// Constant-speed traversal of a waypoint polyline.
struct PathCursor<'a> {
    waypoints: &'a [Waypoint],
    arc: Vec<f64>,
    seg: usize,
}

impl<'a> PathCursor<'a> {
    fn new(waypoints: &'a [Waypoint]) -> Self {
        let mut arc = Vec::with_capacity(waypoints.len());
        let mut acc = 0.0;
        for (i, w) in waypoints.iter().enumerate() {
            if i > 0 {
                acc += distance(&waypoints[i - 1].position, &w.position);
            }
            arc.push(acc);
        }
        PathCursor {
            waypoints,
            arc,
            seg: 0,
        }
    }

    fn length(&self) -> f64 {
        *self.arc.last().expect("non-empty path")
    }

    /// Pose and segment kind at arc length `s`; queries must not decrease.
    fn at(&mut self, s: f64) -> (Point3, UnitQuaternion<f64>, SegmentKind) {
        let w = self.waypoints;
        if w.len() == 1 {
            return (w[0].position, w[0].orientation, w[0].kind);
        }
        while self.seg + 2 < w.len() && self.arc[self.seg + 1] < s {
            self.seg += 1;
        }
        let (a, b) = (&w[self.seg], &w[self.seg + 1]);
        let len = self.arc[self.seg + 1] - self.arc[self.seg];
        let t = ((s - self.arc[self.seg]) / len).clamp(0.0, 1.0);
        let q = a.orientation.try_slerp(&b.orientation, t, 1e-12).unwrap_or(b.orientation);
        (a.position + (b.position - a.position) * t, q, segment_kind(a.kind, b.kind))
    }
}

/// Kind of the stretch between two waypoints: contact only between two
/// contact points, approach and depart win over connect.
fn segment_kind(a: SegmentKind, b: SegmentKind) -> SegmentKind {
    use SegmentKind::*;
    match (a, b) {
        (Contact, Contact) => Contact,
        (Approach, _) | (_, Approach) => Approach,
        (Depart, _) | (_, Depart) => Depart,
        _ => Connect,
    }
}

/// Fixed-step execution of `path` against the contact plant.
///
/// Contact and connect stretches run under force control: the PID output is
/// scaled by the plant admittance and accumulated into a tool offset along
/// the tool axes, on top of the path pose. Approach and depart are pure
/// position moves and reset the controller.
pub fn simulate_execution(
    path: &ToolPath,
    surface: &HeightField,
    region: &WrenchRegion,
    gains: &PidGains,
    plant: &PlantConfig,
    seed: u64,
) -> Result<SimulationOutput> {
    gains.validate()?;
    plant.validate()?;
    if !path.waypoints.iter().any(|w| w.kind == SegmentKind::Contact) {
        return Err(ControlError::NoContactWaypoints);
    }
    let dt = plant.timestep;
    let mut cursor = PathCursor::new(&path.waypoints);
    let steps = (cursor.length() / (plant.feed_rate * dt) - 1e-9).ceil().max(0.0) as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, plant.sensor_noise).expect("sigma validated");
    let normal = surface.frame.n;

    let mut offset = Vector3::zeros();
    let mut pid = PidState::default();
    let mut prev_penetration = 0.0;
    let (mut prev_position, mut prev_orientation, _) = cursor.at(0.0);
    let mut samples = Vec::with_capacity(steps + 1);
    let mut failure = None;

    for k in 0..=steps {
        let t = k as f64 * dt;
        let s = (plant.feed_rate * t).min(cursor.length());
        let (p, q, kind) = cursor.at(s);
        let controlled = matches!(kind, SegmentKind::Contact | SegmentKind::Connect);
        if !controlled {
            offset = Vector3::zeros();
            pid = PidState::default();
        }

        let commanded = p + offset;
        let actual = commanded;
        let surface_offset = plant.vibration.offset(t, &normal);
        let (depth, outside) = match penetration(&actual, surface, surface_offset) {
            Some(d) => (d, false),
            None => (0.0, true),
        };
        let rate = if k == 0 { 0.0 } else { (depth - prev_penetration) / dt };
        let mut wrench = contact_force(depth, rate, plant);
        if plant.sensor_noise > 0.0 {
            for i in 0..3 {
                wrench[i] += noise.sample(&mut rng);
            }
        }

        let (error, u_wrench) = if controlled {
            let e = wrench_region_error(&wrench, region);
            let (u, next) = pid_step(&pid, &e, dt, gains)?;
            pid = next;
            (e, u)
        } else {
            (Wrench::zeros(), Wrench::zeros())
        };
        let rot = (q * prev_orientation.inverse()).scaled_axis();
        let shift = p - prev_position;
        let u_pose = Wrench::new(shift.x, shift.y, shift.z, rot.x, rot.y, rot.z);

        samples.push(TrajectorySample {
            t,
            kind,
            commanded_position: commanded,
            commanded_orientation: q,
            actual_position: actual,
            wrench,
            error,
            u_pose,
            u_wrench,
            outside_surface: outside,
        });

        let peak = wrench.fixed_rows::<3>(0).amax();
        if peak > plant.force_limit {
            failure = Some(Failure {
                reason: FailureReason::ForceLimitExceeded,
                t,
                force: peak,
            });
            break;
        }
        if controlled {
            let local = Vector3::new(u_wrench[0], u_wrench[1], u_wrench[2]) * plant.admittance;
            offset += q * local;
        }
        prev_penetration = depth;
        prev_position = actual;
        prev_orientation = q;
    }

    let trajectory = Trajectory {
        timestep: dt,
        samples,
        success: failure.is_none(),
        failure,
    };
    let metrics = control_metrics(&trajectory, region)?;
    Ok(SimulationOutput {
        trajectory,
        metrics,
    })
}
