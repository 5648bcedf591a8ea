use serde::{Deserialize, Serialize};

use sandbench_geometry::{PointCloud, SpatialIndex};

use crate::{PerceptionError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SorResult {
    pub inliers: Vec<usize>,
    pub outliers: Vec<usize>,
    /// Mean distance of each point to its k nearest neighbors.
    pub mean_distances: Vec<f64>,
    pub threshold: f64,
}

/// Statistical outlier removal.
///
/// A point is an outlier when its mean distance to its `k` nearest other
/// points exceeds `mean + multiplier · stddev` of that statistic over the
/// whole cloud (population standard deviation).
pub fn statistical_outlier_removal(
    cloud: &PointCloud,
    k: usize,
    multiplier: f64,
) -> Result<SorResult> {
    if cloud.len() <= k {
        return Err(PerceptionError::InsufficientPoints {
            needed: k + 1,
            got: cloud.len(),
        });
    }
    let index = SpatialIndex::new(cloud.points.clone())?;
    sor_with_index(&index, k, multiplier)
}

pub(crate) fn sor_with_index(index: &SpatialIndex, k: usize, multiplier: f64) -> Result<SorResult> {
    if k == 0 {
        return Err(PerceptionError::InvalidParameter("k must be at least 1".into()));
    }
    if index.len() <= k {
        return Err(PerceptionError::InsufficientPoints {
            needed: k + 1,
            got: index.len(),
        });
    }
    let mut mean_distances = Vec::with_capacity(index.len());
    for (i, p) in index.points().iter().enumerate() {
        let hood = index.knn(p, k + 1)?;
        let mut sum = 0.0;
        let mut taken = 0;
        for n in hood.iter().filter(|n| n.id != i).take(k) {
            sum += n.distance;
            taken += 1;
        }
        mean_distances.push(sum / taken as f64);
    }
    let n = mean_distances.len() as f64;
    let mean = mean_distances.iter().sum::<f64>() / n;
    let var = mean_distances.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    let threshold = mean + multiplier * var.sqrt();

    let (outliers, inliers): (Vec<usize>, Vec<usize>) =
        (0..mean_distances.len()).partition(|&i| mean_distances[i] > threshold);
    Ok(SorResult {
        inliers,
        outliers,
        mean_distances,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use sandbench_geometry::Point3;

    #[test]
    fn k_points_are_insufficient() {
        let cloud = PointCloud::new(vec![Point3::origin(); 8]);
        assert!(matches!(
            statistical_outlier_removal(&cloud, 8, 2.0),
            Err(PerceptionError::InsufficientPoints { needed: 9, got: 8 })
        ));
    }

    #[test]
    fn far_point_is_removed() {
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push(Point3::new(i as f64 * 1e-3, j as f64 * 1e-3, 0.0));
            }
        }
        pts.push(Point3::new(19e-3, 4.5e-3, 0.0));
        let res = statistical_outlier_removal(&PointCloud::new(pts), 8, 1.0).unwrap();
        assert_eq!(res.outliers, vec![100]);
        assert_eq!(res.inliers.len(), 100);
    }
}
