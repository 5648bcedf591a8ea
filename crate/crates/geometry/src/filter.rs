use std::collections::BTreeMap;

use crate::{Aabb, GeometryError, Point3, PointCloud, Result, Vector3};

/// One point per occupied voxel, at the centroid of the points inside it.
///
/// The grid is anchored at the cloud's minimum corner, so voxel keys are
/// `floor((p - min) / leaf)`. Output is ordered by voxel key. Scan-line ids
/// and normals are dropped.
pub fn voxel_downsample(cloud: &PointCloud, leaf: f64) -> Result<PointCloud> {
    if !(leaf > 0.0 && leaf.is_finite()) {
        return Err(GeometryError::InvalidParameter(format!(
            "voxel leaf must be positive, got {leaf}"
        )));
    }
    let Some(bounds) = cloud.bounds() else {
        return Ok(PointCloud {
            meta: cloud.meta.clone(),
            ..PointCloud::default()
        });
    };

    let mut voxels: BTreeMap<(i64, i64, i64), (Vector3, usize)> = BTreeMap::new();
    for p in &cloud.points {
        let entry = voxels
            .entry(voxel_key(p, &bounds.min, leaf))
            .or_insert((Vector3::zeros(), 0));
        entry.0 += p.coords;
        entry.1 += 1;
    }
    let points = voxels
        .into_values()
        .map(|(sum, n)| Point3::from(sum / n as f64))
        .collect();
    Ok(PointCloud {
        points,
        line_index: None,
        normals: None,
        meta: cloud.meta.clone(),
    })
}

pub(crate) fn voxel_key(p: &Point3, origin: &Point3, leaf: f64) -> (i64, i64, i64) {
    (
        ((p.x - origin.x) / leaf).floor() as i64,
        ((p.y - origin.y) / leaf).floor() as i64,
        ((p.z - origin.z) / leaf).floor() as i64,
    )
}

/// Keeps the points inside the box (bounds inclusive), in their original order.
pub fn crop_box(cloud: &PointCloud, bbox: &Aabb) -> PointCloud {
    let keep: Vec<usize> = cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| bbox.contains(p))
        .map(|(i, _)| i)
        .collect();
    cloud.select(&keep)
}
