use nalgebra::{Matrix3, Rotation3, Unit, UnitQuaternion};
use serde::{Deserialize, Serialize};

use sandbench_geometry::{distance, Point3, Vector3};

use crate::{Contour, PlannerConfig, PlannerError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Contact,
    Connect,
    Approach,
    Depart,
}

/// Position with its segment kind and the contour pass it belongs to.
/// Connect points carry the pass they leave.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathPoint {
    pub position: Point3,
    pub kind: SegmentKind,
    pub pass: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "WaypointRecord", from = "WaypointRecord")]
pub struct Waypoint {
    pub position: Point3,
    /// Columns of the rotation are tool x (along travel), y and z (into the
    /// surface).
    pub orientation: UnitQuaternion<f64>,
    pub travel: Vector3,
    pub kind: SegmentKind,
    pub pass: usize,
}

impl Waypoint {
    pub fn tool_z(&self) -> Vector3 {
        self.orientation * Vector3::z()
    }
}

#[derive(Serialize, Deserialize)]
struct WaypointRecord {
    position_m: [f64; 3],
    quaternion_wxyz: [f64; 4],
    kind: SegmentKind,
    travel: [f64; 3],
    pass: usize,
}

impl From<Waypoint> for WaypointRecord {
    fn from(w: Waypoint) -> Self {
        let q = w.orientation.quaternion();
        WaypointRecord {
            position_m: [w.position.x, w.position.y, w.position.z],
            quaternion_wxyz: [q.w, q.i, q.j, q.k],
            kind: w.kind,
            travel: [w.travel.x, w.travel.y, w.travel.z],
            pass: w.pass,
        }
    }
}

impl From<WaypointRecord> for Waypoint {
    fn from(r: WaypointRecord) -> Self {
        let [w, i, j, k] = r.quaternion_wxyz;
        Waypoint {
            position: Point3::from(r.position_m),
            orientation: UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, i, j, k)),
            travel: Vector3::from(r.travel),
            kind: r.kind,
            pass: r.pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolPath {
    pub waypoints: Vec<Waypoint>,
    /// Configuration with the band half-width resolved.
    pub config: PlannerConfig,
    pub source: String,
    /// Polyline length over all waypoints, meters.
    pub total_length: f64,
    /// Slicing planes whose band held no surface.
    #[serde(default)]
    pub skipped_planes: Vec<usize>,
}

impl ToolPath {
    pub fn new(waypoints: Vec<Waypoint>, config: PlannerConfig, source: String) -> Self {
        let total_length = polyline_length(waypoints.iter().map(|w| &w.position));
        ToolPath {
            waypoints,
            config,
            source,
            total_length,
            skipped_planes: Vec::new(),
        }
    }

    /// Length from the first to the last contact waypoint.
    pub fn working_length(&self) -> f64 {
        let first = self.waypoints.iter().position(|w| w.kind == SegmentKind::Contact);
        let last = self.waypoints.iter().rposition(|w| w.kind == SegmentKind::Contact);
        match (first, last) {
            (Some(a), Some(b)) => polyline_length(self.waypoints[a..=b].iter().map(|w| &w.position)),
            _ => 0.0,
        }
    }

    pub fn contact_waypoints(&self) -> impl Iterator<Item = &Waypoint> {
        self.waypoints.iter().filter(|w| w.kind == SegmentKind::Contact)
    }
}

fn polyline_length<'a>(points: impl Iterator<Item = &'a Point3>) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<&Point3> = None;
    for p in points {
        if let Some(q) = prev {
            total += distance(q, p);
        }
        prev = Some(p);
    }
    total
}

/// Joins contours into one serpentine: odd contours are reversed and
/// straight connect segments sampled at `spacing` bridge the gaps.
pub fn connect_meander(contours: &[Contour], spacing: f64) -> Result<Vec<PathPoint>> {
    if contours.is_empty() || contours.iter().all(|c| c.points.is_empty()) {
        return Err(PlannerError::NoContours);
    }
    if !(spacing > 0.0) {
        return Err(PlannerError::InvalidParameter(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    let mut out: Vec<PathPoint> = Vec::new();
    for (pass, contour) in contours.iter().enumerate() {
        let ordered: Vec<Point3> = if pass % 2 == 0 {
            contour.points.clone()
        } else {
            contour.points.iter().rev().copied().collect()
        };
        if let (Some(prev), Some(next)) = (out.last().copied(), ordered.first()) {
            let gap = distance(&prev.position, next);
            let steps = (gap / spacing - 1e-9).ceil().max(1.0) as usize;
            for j in 1..steps {
                let t = j as f64 / steps as f64;
                out.push(PathPoint {
                    position: prev.position + (next - prev.position) * t,
                    kind: SegmentKind::Connect,
                    pass: pass - 1,
                });
            }
        }
        for p in ordered {
            push_distinct(&mut out, PathPoint {
                position: p,
                kind: SegmentKind::Contact,
                pass,
            });
        }
    }
    Ok(out)
}

fn push_distinct(out: &mut Vec<PathPoint>, p: PathPoint) {
    if out.last().is_none_or(|q| distance(&q.position, &p.position) > 1e-12) {
        out.push(p);
    }
}

/// Travel direction of each point from neighbors within the same run of
/// equal kind and pass; isolated points fall back to their path neighbors.
fn travel_directions(points: &[PathPoint]) -> Vec<Vector3> {
    let n = points.len();
    let same = |a: usize, b: usize| points[a].kind == points[b].kind && points[a].pass == points[b].pass;
    (0..n)
        .map(|i| {
            let prev = (i > 0 && same(i - 1, i)).then(|| i - 1);
            let next = (i + 1 < n && same(i, i + 1)).then(|| i + 1);
            let (a, b) = match (prev, next) {
                (Some(a), Some(b)) => (a, b),
                (None, Some(b)) => (i, b),
                (Some(a), None) => (a, i),
                (None, None) if i + 1 < n => (i, i + 1),
                (None, None) if i > 0 => (i - 1, i),
                _ => return Vector3::x(),
            };
            let d = points[b].position - points[a].position;
            if d.norm() > 0.0 {
                d.normalize()
            } else {
                Vector3::x()
            }
        })
        .collect()
}

/// Tool frame with z against the surface normal tilted by `alpha_rad` about
/// the travel direction and x along travel.
pub fn tool_orientation(normal: &Vector3, travel: &Vector3, alpha_rad: f64) -> UnitQuaternion<f64> {
    let axis = Unit::new_normalize(*travel);
    let tilted = Rotation3::from_axis_angle(&axis, alpha_rad) * normal;
    let z = -tilted.normalize();
    let mut x = travel - z * z.dot(travel);
    if x.norm() < 1e-9 {
        // Travel along the tool axis: any perpendicular will do.
        let helper = if z.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        x = helper - z * z.dot(&helper);
    }
    let x = x.normalize();
    let y = z.cross(&x);
    let m = Matrix3::from_columns(&[x, y, z]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}

/// Orientation from a per-point normal lookup. `normal_at` receives the
/// position of each waypoint.
pub fn orient_with<F>(points: &[PathPoint], alpha_deg: f64, mut normal_at: F) -> Result<Vec<Waypoint>>
where
    F: FnMut(&Point3) -> Result<Vector3>,
{
    if points.is_empty() {
        return Err(PlannerError::NoContours);
    }
    let alpha = alpha_deg.to_radians();
    let travel = travel_directions(points);
    points
        .iter()
        .zip(travel)
        .map(|(p, t)| {
            let normal = normal_at(&p.position)?;
            Ok(Waypoint {
                position: p.position,
                orientation: tool_orientation(&normal, &t, alpha),
                travel: t,
                kind: p.kind,
                pass: p.pass,
            })
        })
        .collect()
}

/// Orientation from the normals stored with the cloud; each waypoint uses
/// the normal of its nearest cloud point.
pub fn orient_waypoints(
    points: &[PathPoint],
    cloud: &sandbench_geometry::PointCloud,
    index: &sandbench_geometry::SpatialIndex,
    alpha_deg: f64,
) -> Result<Vec<Waypoint>> {
    let normals = cloud.normals.as_ref().ok_or(PlannerError::MissingNormals)?;
    orient_with(points, alpha_deg, |p| Ok(normals[index.nearest(p).id]))
}

/// Straight approach from `clearance` back along the first tool axis and a
/// symmetric depart, both sampled at `spacing`.
pub fn add_approach_depart(
    waypoints: Vec<Waypoint>,
    clearance: f64,
    spacing: f64,
) -> Result<Vec<Waypoint>> {
    let (Some(first), Some(last)) = (waypoints.first().copied(), waypoints.last().copied()) else {
        return Err(PlannerError::NoContours);
    };
    if !(clearance > 0.0 && spacing > 0.0) {
        return Err(PlannerError::InvalidParameter(
            "clearance and spacing must be positive".into(),
        ));
    }
    let steps = (clearance / spacing - 1e-9).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(waypoints.len() + 2 * steps);
    let z0 = first.tool_z();
    for j in 0..steps {
        let back = clearance * (1.0 - j as f64 / steps as f64);
        out.push(Waypoint {
            position: first.position - z0 * back,
            travel: z0,
            kind: SegmentKind::Approach,
            ..first
        });
    }
    out.extend(waypoints);
    let z1 = last.tool_z();
    for j in 1..=steps {
        let back = clearance * j as f64 / steps as f64;
        out.push(Waypoint {
            position: last.position - z1 * back,
            travel: -z1,
            kind: SegmentKind::Depart,
            ..last
        });
    }
    Ok(out)
}
