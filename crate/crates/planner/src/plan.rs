use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use sandbench_geometry::{
    estimate_normals_at, pca_frame, PointCloud, SpatialIndex, SurfaceFrame, Vector3,
};

use crate::{
    add_approach_depart, alignment_metrics, check_projectively_planar, connect_meander,
    define_slicing_planes, extract_contour, orient_with, AlignmentMetrics, ContourParams,
    PlannerConfig, PlannerError, Result, ToolPath,
};

/// Points sampled when estimating the median spacing.
const SPACING_SAMPLES: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanOutput {
    #[serde(flatten)]
    pub path: ToolPath,
    pub metrics: AlignmentMetrics,
    pub frame: SurfaceFrame,
}

/// Median nearest-neighbor distance over an evenly strided subset.
pub fn median_spacing(index: &SpatialIndex) -> Result<f64> {
    if index.len() < 2 {
        return Err(PlannerError::InvalidParameter(
            "spacing needs at least two points".into(),
        ));
    }
    let stride = index.len().div_ceil(SPACING_SAMPLES);
    let mut d: Vec<f64> = (0..index.len())
        .step_by(stride)
        .map(|i| index.knn(&index.point(i), 2).map(|h| h[1].distance))
        .collect::<std::result::Result<_, _>>()?;
    d.sort_by(f64::total_cmp);
    Ok(d[d.len() / 2])
}

/// Replaces each point's height along `frame.n` by the mean height of its
/// `k` nearest neighbors.
pub fn lowpass_heights(cloud: &PointCloud, frame: &SurfaceFrame, k: usize) -> Result<PointCloud> {
    let index = SpatialIndex::new(cloud.points.clone())?;
    let k = k.min(cloud.len());
    let points = cloud
        .points
        .iter()
        .map(|p| {
            let hood = index.knn(p, k)?;
            let mean = hood
                .iter()
                .map(|n| (index.point(n.id) - frame.origin).dot(&frame.n))
                .sum::<f64>()
                / hood.len() as f64;
            let own = (p - frame.origin).dot(&frame.n);
            Ok(p + frame.n * (mean - own))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PointCloud {
        points,
        normals: None,
        ..cloud.clone()
    })
}

/// Slices, connects, orients and scores a tool path over `cloud`.
pub fn plan_path(cloud: &PointCloud, cfg: &PlannerConfig) -> Result<PlanOutput> {
    cfg.validate()?;
    let mut frame = pca_frame(cloud)?;
    let smoothed;
    let surface = if cfg.lowpass_k > 0 {
        smoothed = lowpass_heights(cloud, &frame, cfg.lowpass_k)?;
        frame = pca_frame(&smoothed)?;
        &smoothed
    } else {
        cloud
    };
    let index = SpatialIndex::new(surface.points.clone())?;
    let band = match cfg.band_halfwidth {
        Some(b) => b,
        None => 1.5 * median_spacing(&index)?,
    };
    let mut resolved = cfg.clone();
    resolved.band_halfwidth = Some(band);

    let planarity = check_projectively_planar(surface, &frame, cfg.planarity_cell, band);
    if !planarity.planar {
        return Err(PlannerError::NotProjectivelyPlanar {
            cells: planarity.violations.len(),
        });
    }

    let params = ContourParams {
        band_halfwidth: band,
        waypoint_spacing: cfg.waypoint_spacing,
        smoothing_window: cfg.smoothing_window,
        interpolation: cfg.interpolation,
    };
    let mut contours = Vec::new();
    let mut skipped = Vec::new();
    for plane in define_slicing_planes(&frame, cfg.stepover, band)? {
        match extract_contour(&surface.points, &frame, &plane, &params) {
            Ok(c) => contours.push(c),
            Err(PlannerError::EmptyBand { plane }) => skipped.push(plane),
            Err(e) => return Err(e),
        }
    }
    let points = connect_meander(&contours, cfg.waypoint_spacing)?;

    // Normals are only needed at the nearest neighbors of waypoints.
    let mut cache: HashMap<usize, Vector3> = HashMap::new();
    let stored = surface.normals.as_ref();
    let waypoints = orient_with(&points, cfg.angle_of_attack_deg, |p| {
        let id = index.nearest(p).id;
        if let Some(normals) = stored {
            let n = normals[id];
            return Ok(if n.dot(&frame.n) < 0.0 { -n } else { n });
        }
        if let Some(n) = cache.get(&id) {
            return Ok(*n);
        }
        let n = estimate_normals_at(&index, &[id], cfg.normal_k, &frame.n)?[0];
        cache.insert(id, n);
        Ok(n)
    })?;
    let waypoints = add_approach_depart(waypoints, cfg.clearance, cfg.waypoint_spacing)?;

    let metrics = alignment_metrics(&waypoints, &index)?;
    if metrics.max > band {
        return Err(PlannerError::OffSurface {
            distance: metrics.max,
            band,
        });
    }
    let mut path = ToolPath::new(waypoints, resolved, cloud.meta.source.clone());
    path.skipped_planes = skipped;
    Ok(PlanOutput {
        path,
        metrics,
        frame,
    })
}
