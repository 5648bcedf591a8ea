use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use sandbench_geometry::{PointCloud, SurfaceFrame};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarityViolation {
    /// Raster cell index along `u` and `v`.
    pub cell: [i64; 2],
    /// Height spread along the frame normal, meters.
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarityReport {
    pub planar: bool,
    pub limit: f64,
    pub violations: Vec<PlanarityViolation>,
}

/// Rasterizes the cloud in the frame's `(u, v)` plane and requires every
/// occupied cell's height spread to stay below `4 · band_halfwidth`, i.e.
/// the surface is a single-valued height field over the plane.
pub fn check_projectively_planar(
    cloud: &PointCloud,
    frame: &SurfaceFrame,
    cell: f64,
    band_halfwidth: f64,
) -> PlanarityReport {
    let limit = 4.0 * band_halfwidth;
    let mut cells: BTreeMap<[i64; 2], (f64, f64)> = BTreeMap::new();
    for p in &cloud.points {
        let l = frame.to_local(p);
        let key = [(l.x / cell).floor() as i64, (l.y / cell).floor() as i64];
        let e = cells.entry(key).or_insert((l.z, l.z));
        e.0 = e.0.min(l.z);
        e.1 = e.1.max(l.z);
    }
    let violations: Vec<PlanarityViolation> = cells
        .into_iter()
        .filter(|(_, (lo, hi))| hi - lo >= limit)
        .map(|(cell, (lo, hi))| PlanarityViolation {
            cell,
            spread: hi - lo,
        })
        .collect();
    PlanarityReport {
        planar: violations.is_empty(),
        limit,
        violations,
    }
}
