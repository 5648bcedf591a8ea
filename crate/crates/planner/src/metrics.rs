use serde::{Deserialize, Serialize};

use sandbench_geometry::SpatialIndex;

use crate::{PlannerError, Result, SegmentKind, Waypoint};

/// Distances from contact waypoints to their nearest surface point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMetrics {
    pub rmse: f64,
    pub mae: f64,
    pub max: f64,
    pub n_waypoints: usize,
}

pub fn alignment_metrics(waypoints: &[Waypoint], index: &SpatialIndex) -> Result<AlignmentMetrics> {
    let distances: Vec<f64> = waypoints
        .iter()
        .filter(|w| w.kind == SegmentKind::Contact)
        .map(|w| index.nearest(&w.position).distance)
        .collect();
    if distances.is_empty() {
        return Err(PlannerError::NoContactWaypoints);
    }
    let n = distances.len() as f64;
    let mae = distances.iter().sum::<f64>() / n;
    let rmse = (distances.iter().map(|d| d * d).sum::<f64>() / n).sqrt();
    let max = distances.iter().copied().fold(0.0, f64::max);
    // Rounding can invert the ordering by an ulp when all distances agree.
    let rmse = rmse.max(mae).min(max);
    Ok(AlignmentMetrics {
        rmse,
        mae,
        max,
        n_waypoints: distances.len(),
    })
}
