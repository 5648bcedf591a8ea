use nalgebra::{Matrix3, Rotation3, Unit, SVD};
use serde::{Deserialize, Serialize};

use crate::{GeometryError, Point3, PointCloud, Result, Vector3};

const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

/// Proper rigid motion `p' = R p + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3) -> Result<Self> {
        let t = Self {
            rotation,
            translation,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_axis_angle(axis: &Vector3, angle: f64, translation: Vector3) -> Self {
        Self {
            rotation: Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle).into_inner(),
            translation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let gram = self.rotation.transpose() * self.rotation;
        let off = (gram - Matrix3::identity()).abs().max();
        let det = self.rotation.determinant();
        if off > ORTHONORMAL_TOLERANCE || (det - 1.0).abs() > ORTHONORMAL_TOLERANCE {
            return Err(GeometryError::InvalidParameter(format!(
                "rotation is not proper orthonormal (|RᵀR - I| = {off:e}, det = {det})"
            )));
        }
        if !self.translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidParameter(
                "translation is not finite".into(),
            ));
        }
        Ok(())
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vector3) -> Vector3 {
        self.rotation * v
    }

    pub fn compose(&self, inner: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * inner.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Rotation angle of `self⁻¹ ∘ other`, in radians.
    pub fn angle_to(&self, other: &RigidTransform) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

/// Moves points and rotates normals.
pub fn apply_transform(cloud: &PointCloud, transform: &RigidTransform) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|p| transform.apply(p)).collect(),
        line_index: cloud.line_index.clone(),
        normals: cloud
            .normals
            .as_ref()
            .map(|n| n.iter().map(|v| transform.apply_vector(v)).collect()),
        meta: crate::CloudMeta {
            view_axis: transform.apply_vector(&cloud.meta.view_axis),
            ..cloud.meta.clone()
        },
    }
}

/// Closed-form least-squares rigid registration of corresponding point sets.
///
/// Minimizes `Σ |R src_i + t - dst_i|²`. A reflection solution is turned into
/// a proper rotation by negating the axis of the smallest singular value.
pub fn estimate_rigid_transform(src: &[Point3], dst: &[Point3]) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(GeometryError::InvalidParameter(format!(
            "{} source points but {} targets",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(GeometryError::DegenerateInput(format!(
            "registration needs at least 3 correspondences, got {}",
            src.len()
        )));
    }
    let n = src.len() as f64;
    let src_mean = src.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let dst_mean = dst.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;

    let mut cross = Matrix3::zeros();
    let mut src_cov = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        let sc = s.coords - src_mean;
        let dc = d.coords - dst_mean;
        cross += dc * sc.transpose();
        src_cov += sc * sc.transpose();
    }

    let spread = SVD::new(src_cov, false, false).singular_values;
    if spread[1] <= 1e-12 * spread[0].max(f64::MIN_POSITIVE) {
        return Err(GeometryError::DegenerateInput(
            "source points are colinear".into(),
        ));
    }

    let svd = SVD::new(cross, true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut correction = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        correction[(2, 2)] = -1.0;
    }
    let rotation = u * correction * v_t;
    let translation = dst_mean - rotation * src_mean;
    Ok(RigidTransform {
        rotation,
        translation,
    })
}
