use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::normals::covariance;
use crate::{GeometryError, Point3, PointCloud, Result, Vector3};

/// Principal frame of a scanned surface.
///
/// `u` is the direction of largest spread, `v` the middle one and `n` the
/// surface normal, oriented towards the view axis. The frame is right handed
/// (`v = n × u`) and `extents` are the half-lengths along `u` and `v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFrame {
    pub origin: Point3,
    pub u: Vector3,
    pub v: Vector3,
    pub n: Vector3,
    pub extents: [f64; 2],
}

impl SurfaceFrame {
    /// Coordinates of `p` as `(u, v, height)`.
    pub fn to_local(&self, p: &Point3) -> Vector3 {
        let d = p - self.origin;
        Vector3::new(d.dot(&self.u), d.dot(&self.v), d.dot(&self.n))
    }

    pub fn to_world(&self, local: &Vector3) -> Point3 {
        self.origin + self.u * local.x + self.v * local.y + self.n * local.z
    }
}

/// Relative eigenvalue gap below which the two in-plane axes count as equal.
const IN_PLANE_TIE: f64 = 1e-6;

pub fn pca_frame(cloud: &PointCloud) -> Result<SurfaceFrame> {
    if cloud.len() < 3 {
        return Err(GeometryError::DegenerateInput(format!(
            "principal frame needs 3 points, got {}",
            cloud.len()
        )));
    }
    let (origin, cov) = covariance(&cloud.points);
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let largest = eig.eigenvalues[order[0]];
    if !(eig.eigenvalues[order[1]] > 1e-12 * largest) {
        return Err(GeometryError::DegenerateInput("points are colinear".into()));
    }

    let mut n: Vector3 = eig.eigenvectors.column(order[2]).normalize();
    if n.dot(&cloud.meta.view_axis) < 0.0 {
        n = -n;
    }
    let mut u: Vector3 = if largest - eig.eigenvalues[order[1]] <= IN_PLANE_TIE * largest {
        // No preferred in-plane direction: use the world axis that projects
        // longest onto the surface plane, x before y before z.
        let mut best = Vector3::zeros();
        for axis in [Vector3::x(), Vector3::y(), Vector3::z()] {
            let projected = axis - n * n.dot(&axis);
            if projected.norm() > best.norm() + 1e-12 {
                best = projected;
            }
        }
        best.normalize()
    } else {
        eig.eigenvectors.column(order[0]).normalize()
    };
    // Deterministic sign: largest-magnitude component positive.
    if u[u.iamax()] < 0.0 {
        u = -u;
    }
    // Re-orthogonalize against u before completing the basis.
    n = (n - u * u.dot(&n)).normalize();
    let v = n.cross(&u).normalize();

    let mut extents = [0.0f64; 2];
    for p in &cloud.points {
        let d = p - origin;
        extents[0] = extents[0].max(d.dot(&u).abs());
        extents[1] = extents[1].max(d.dot(&v).abs());
    }
    Ok(SurfaceFrame {
        origin,
        u,
        v,
        n,
        extents,
    })
}
