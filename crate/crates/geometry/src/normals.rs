use nalgebra::{Matrix3, SymmetricEigen};

use crate::{GeometryError, Point3, PointCloud, Result, SpatialIndex, Vector3};

/// Allowed deviation from unit length for stored normals.
pub const NORMAL_TOLERANCE: f64 = 1e-6;

/// Normals from the covariance of each point's `k` nearest neighbors,
/// oriented towards the cloud's view axis.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<PointCloud> {
    check_neighbourhood(cloud.len(), k)?;
    let index = SpatialIndex::new(cloud.points.clone())?;
    let ids: Vec<usize> = (0..cloud.len()).collect();
    let normals = estimate_normals_at(&index, &ids, k, &cloud.meta.view_axis)?;
    Ok(PointCloud {
        normals: Some(normals),
        ..cloud.clone()
    })
}

/// Same estimate as [`estimate_normals`], restricted to the listed point ids.
pub fn estimate_normals_at(
    index: &SpatialIndex,
    ids: &[usize],
    k: usize,
    view_axis: &Vector3,
) -> Result<Vec<Vector3>> {
    check_neighbourhood(index.len(), k)?;
    ids.iter()
        .map(|&id| {
            // k neighbors plus the point itself.
            let hood = index.knn(&index.point(id), k + 1)?;
            let pts: Vec<Point3> = hood.iter().map(|n| index.point(n.id)).collect();
            Ok(orient(smallest_axis(&pts), view_axis))
        })
        .collect()
}

fn check_neighbourhood(n: usize, k: usize) -> Result<()> {
    if k < 3 {
        return Err(GeometryError::InvalidParameter(format!(
            "normal estimation needs k ≥ 3, got {k}"
        )));
    }
    if n < k + 1 {
        return Err(GeometryError::InsufficientPoints {
            needed: k + 1,
            got: n,
        });
    }
    Ok(())
}

pub(crate) fn covariance(points: &[Point3]) -> (Point3, Matrix3<f64>) {
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let cov = points.iter().fold(Matrix3::zeros(), |a, p| {
        let d = p.coords - mean;
        a + d * d.transpose()
    }) / n;
    (Point3::from(mean), cov)
}

/// Eigenvector of the smallest covariance eigenvalue.
fn smallest_axis(points: &[Point3]) -> Vector3 {
    let (_, cov) = covariance(points);
    let eig = SymmetricEigen::new(cov);
    let i = eig.eigenvalues.imin();
    eig.eigenvectors.column(i).normalize()
}

fn orient(n: Vector3, view: &Vector3) -> Vector3 {
    if n.dot(view) < 0.0 {
        -n
    } else {
        n
    }
}
