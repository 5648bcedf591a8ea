use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use sandbench_geometry::{Aabb, Point3, PointCloud, SpatialIndex, Vector3};

use crate::linefit::regression_candidates;
use crate::sor::sor_with_index;
use crate::{PerceptionConfig, PerceptionError, Result, StageOrder};

/// Peak-to-opposite-peak ratio below which mixed-sign regions count as rough.
const ROUGH_DOMINANCE: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefectKind {
    Dent,
    Bump,
    Rough,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectRegion {
    /// Ids into the input cloud.
    pub point_ids: Vec<usize>,
    pub centroid: Point3,
    pub bounds: Aabb,
    /// Signed residual of largest magnitude; negative below the fitted surface.
    pub peak_deviation: f64,
    /// Square meters.
    pub area: f64,
    pub kind: DefectKind,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DefectCounts {
    pub points: usize,
    pub sor_removed: usize,
    pub candidates: usize,
    pub regions: usize,
    pub dents: usize,
    pub bumps: usize,
    pub rough: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub regions: Vec<DefectRegion>,
    /// Ids of regression candidates that survived outlier removal.
    pub candidates: Vec<usize>,
    pub sor_removed: Vec<usize>,
    /// Scan lines too short to fit.
    pub skipped_lines: Vec<u32>,
    pub config: PerceptionConfig,
    pub counts: DefectCounts,
}

/// Outlier removal, per-line regression, clustering and classification.
pub fn detect_defects(cloud: &PointCloud, cfg: &PerceptionConfig) -> Result<DefectReport> {
    cfg.validate()?;
    if cloud.line_index.is_none() {
        return Err(PerceptionError::MissingLineIndex);
    }
    let raw_index = SpatialIndex::new(cloud.points.clone())?;
    let sor = sor_with_index(&raw_index, cfg.sor_k, cfg.sor_multiplier)?;

    // (cloud id, signed residual) of every surviving candidate.
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    let skipped_lines;
    match cfg.order {
        StageOrder::SorFirst => {
            let working = cloud.select(&sor.inliers);
            let reg = regression_candidates(&working, cfg)?;
            for (local, &id) in sor.inliers.iter().enumerate() {
                if reg.flagged[local] {
                    candidates.push((id, reg.residuals[local]));
                }
            }
            skipped_lines = reg.skipped_lines;
        }
        StageOrder::RegressionFirst => {
            let reg = regression_candidates(cloud, cfg)?;
            let mut removed = vec![false; cloud.len()];
            for &i in &sor.outliers {
                removed[i] = true;
            }
            for id in 0..cloud.len() {
                if reg.flagged[id] && !removed[id] {
                    candidates.push((id, reg.residuals[id]));
                }
            }
            skipped_lines = reg.skipped_lines;
        }
    }

    let mut regions = Vec::new();
    if !candidates.is_empty() {
        let cand_index =
            SpatialIndex::new(candidates.iter().map(|&(id, _)| cloud.points[id]).collect())?;
        for component in connected_components(&cand_index, cfg.cluster_radius) {
            if component.len() < cfg.cluster_min_points {
                continue;
            }
            let members: Vec<(usize, f64)> = component.iter().map(|&c| candidates[c]).collect();
            regions.push(build_region(cloud, &raw_index, &members));
        }
    }

    let counts = DefectCounts {
        points: cloud.len(),
        sor_removed: sor.outliers.len(),
        candidates: candidates.len(),
        regions: regions.len(),
        dents: regions.iter().filter(|r| r.kind == DefectKind::Dent).count(),
        bumps: regions.iter().filter(|r| r.kind == DefectKind::Bump).count(),
        rough: regions.iter().filter(|r| r.kind == DefectKind::Rough).count(),
    };
    Ok(DefectReport {
        regions,
        candidates: candidates.iter().map(|&(id, _)| id).collect(),
        sor_removed: sor.outliers,
        skipped_lines,
        config: cfg.clone(),
        counts,
    })
}

/// Radius-graph connected components, each sorted, ordered by smallest member.
fn connected_components(index: &SpatialIndex, radius: f64) -> Vec<Vec<usize>> {
    let n = index.len();
    let mut label = vec![usize::MAX; n];
    let mut components = Vec::new();
    for seed in 0..n {
        if label[seed] != usize::MAX {
            continue;
        }
        let id = components.len();
        label[seed] = id;
        let mut members = vec![seed];
        let mut queue = VecDeque::from([seed]);
        while let Some(i) = queue.pop_front() {
            for nb in index.radius(&index.point(i), radius) {
                if label[nb.id] == usize::MAX {
                    label[nb.id] = id;
                    members.push(nb.id);
                    queue.push_back(nb.id);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

fn build_region(cloud: &PointCloud, raw_index: &SpatialIndex, members: &[(usize, f64)]) -> DefectRegion {
    let mut point_ids: Vec<usize> = members.iter().map(|&(id, _)| id).collect();
    point_ids.sort_unstable();
    let pts: Vec<Point3> = point_ids.iter().map(|&i| cloud.points[i]).collect();
    let centroid = Point3::from(
        pts.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / pts.len() as f64,
    );
    let bounds = Aabb::from_points(&pts).expect("non-empty region");

    let &(_, peak) = members
        .iter()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
        .expect("non-empty region");
    let opposite = members
        .iter()
        .filter(|(_, r)| r.signum() != peak.signum())
        .map(|(_, r)| r.abs())
        .fold(0.0, f64::max);
    let kind = if opposite > 0.0 && peak.abs() / opposite < ROUGH_DOMINANCE {
        DefectKind::Rough
    } else if peak < 0.0 {
        DefectKind::Dent
    } else {
        DefectKind::Bump
    };

    // Area from the mean nearest-neighbor spacing around the region.
    let spacing = pts
        .iter()
        .map(|p| {
            raw_index
                .knn(p, 2)
                .ok()
                .and_then(|h| h.get(1).map(|n| n.distance))
                .unwrap_or(0.0)
        })
        .sum::<f64>()
        / pts.len() as f64;

    DefectRegion {
        area: pts.len() as f64 * spacing * spacing,
        point_ids,
        centroid,
        bounds,
        peak_deviation: peak,
        kind,
    }
}
