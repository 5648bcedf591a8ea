use serde::{Deserialize, Serialize};

use sandbench_geometry::{distance, Point3, SurfaceFrame, Vector3};

use crate::{Interpolation, PlannerError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlicingPlane {
    pub id: usize,
    pub point: Point3,
    /// Unit normal, equal to the frame's `u` axis.
    pub normal: Vector3,
    /// Position along `u` relative to the frame origin.
    pub offset: f64,
}

impl SlicingPlane {
    pub fn signed_distance(&self, p: &Point3) -> f64 {
        (p - self.point).dot(&self.normal)
    }

    pub fn project(&self, p: &Point3) -> Point3 {
        p - self.normal * self.signed_distance(p)
    }
}

/// Planes normal to `frame.u`, spaced by `stepover` and centered on the
/// frame origin. The outermost planes are pulled in to `extent - inset` so
/// their bands stay on the surface.
pub fn define_slicing_planes(
    frame: &SurfaceFrame,
    stepover: f64,
    inset: f64,
) -> Result<Vec<SlicingPlane>> {
    if !(stepover > 0.0 && stepover.is_finite()) {
        return Err(PlannerError::InvalidParameter(format!(
            "stepover must be positive, got {stepover}"
        )));
    }
    if !(inset >= 0.0) {
        return Err(PlannerError::InvalidParameter(format!(
            "inset must be non-negative, got {inset}"
        )));
    }
    let extent = frame.extents[0];
    let count = (2.0 * extent / stepover + 1e-9).floor() as usize + 1;
    let span = (count - 1) as f64 * stepover;
    let limit = (extent - inset).max(0.0);
    Ok((0..count)
        .map(|i| {
            let offset = (-span / 2.0 + i as f64 * stepover).clamp(-limit, limit);
            SlicingPlane {
                id: i,
                point: frame.origin + frame.u * offset,
                normal: frame.u,
                offset,
            }
        })
        .collect())
}

/// Cross-section of the surface with one slicing plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub plane_id: usize,
    pub points: Vec<Point3>,
    /// Arc length at each point, strictly increasing from zero.
    pub arc: Vec<f64>,
}

impl Contour {
    pub fn length(&self) -> f64 {
        self.arc.last().copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ContourParams {
    pub band_halfwidth: f64,
    pub waypoint_spacing: f64,
    pub smoothing_window: usize,
    pub interpolation: Interpolation,
}

/// Band selection, projection, sorting along `frame.v`, near-duplicate
/// filtering, smoothing and uniform resampling.
pub fn extract_contour(
    points: &[Point3],
    frame: &SurfaceFrame,
    plane: &SlicingPlane,
    params: &ContourParams,
) -> Result<Contour> {
    let mut band: Vec<(f64, usize, Point3)> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| plane.signed_distance(p).abs() <= params.band_halfwidth)
        .map(|(i, p)| {
            let q = plane.project(p);
            ((q - frame.origin).dot(&frame.v), i, q)
        })
        .collect();
    if band.len() < 2 {
        return Err(PlannerError::EmptyBand { plane: plane.id });
    }
    band.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let min_gap = params.waypoint_spacing / 4.0;
    let mut filtered: Vec<Point3> = Vec::with_capacity(band.len());
    for (_, _, q) in band {
        match filtered.last() {
            Some(prev) if distance(prev, &q) < min_gap => {}
            _ => filtered.push(q),
        }
    }
    if filtered.len() < 2 {
        return Err(PlannerError::EmptyBand { plane: plane.id });
    }

    let smoothed = moving_average(&filtered, params.smoothing_window);
    let (points, arc) = resample(&smoothed, params.waypoint_spacing, params.interpolation);
    Ok(Contour {
        plane_id: plane.id,
        points,
        arc,
    })
}

/// Centered moving average. Near the ends the window shrinks symmetrically,
/// so the endpoints themselves are kept.
fn moving_average(points: &[Point3], window: usize) -> Vec<Point3> {
    let half = window / 2;
    let n = points.len();
    (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let sum = points[i - h..=i + h]
                .iter()
                .fold(Vector3::zeros(), |a, p| a + p.coords);
            Point3::from(sum / (2 * h + 1) as f64)
        })
        .collect()
}

fn cumulative(points: &[Point3]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            acc += distance(&points[i - 1], p);
        }
        out.push(acc);
    }
    out
}

/// Samples at uniform arc spacing no larger than `spacing`, ends included.
fn resample(points: &[Point3], spacing: f64, mode: Interpolation) -> (Vec<Point3>, Vec<f64>) {
    // Smoothing can leave coincident neighbors; they carry no arc length.
    let mut pts: Vec<Point3> = Vec::with_capacity(points.len());
    for p in points {
        if pts.last().is_none_or(|q| distance(q, p) > 1e-12) {
            pts.push(*p);
        }
    }
    let chord = cumulative(&pts);
    let total = *chord.last().expect("non-empty");
    if pts.len() < 2 {
        return (pts, vec![0.0]);
    }
    let segments = (total / spacing - 1e-9).ceil().max(1.0) as usize;
    let step = total / segments as f64;

    let mut out = Vec::with_capacity(segments + 1);
    let mut seg = 0;
    for i in 0..=segments {
        let s = if i == segments { total } else { i as f64 * step };
        while seg + 2 < chord.len() && chord[seg + 1] < s {
            seg += 1;
        }
        let len = chord[seg + 1] - chord[seg];
        let t = ((s - chord[seg]) / len).clamp(0.0, 1.0);
        out.push(match mode {
            Interpolation::Linear => pts[seg] + (pts[seg + 1] - pts[seg]) * t,
            Interpolation::Spline => {
                let m0 = tangent(&pts, &chord, seg) * len;
                let m1 = tangent(&pts, &chord, seg + 1) * len;
                hermite(&pts[seg], &pts[seg + 1], &m0, &m1, t)
            }
        });
    }
    let arc = (0..=segments)
        .map(|i| if i == segments { total } else { i as f64 * step })
        .collect();
    (out, arc)
}

/// Unit-speed tangent at knot `i` from its neighbors, chord parameterized.
fn tangent(pts: &[Point3], chord: &[f64], i: usize) -> Vector3 {
    let a = i.saturating_sub(1);
    let b = (i + 1).min(pts.len() - 1);
    (pts[b] - pts[a]) / (chord[b] - chord[a])
}

fn hermite(p0: &Point3, p1: &Point3, m0: &Vector3, m1: &Vector3, t: f64) -> Point3 {
    let (t2, t3) = (t * t, t * t * t);
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    Point3::from(p0.coords * h00 + m0 * h10 + p1.coords * h01 + m1 * h11)
}
