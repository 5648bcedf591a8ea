//! Geometry substrate shared by the perception, planning and control crates.
//!
//! All lengths are meters internally. Files declaring millimeters are scaled
//! when they are read, never later.

pub mod cloud;
pub mod error;
pub mod filter;
pub mod frame;
pub mod index;
pub mod io;
pub mod normals;
pub mod transform;

pub use cloud::{Aabb, CloudMeta, LengthUnit, PointCloud};
pub use error::{GeometryError, Result};
pub use filter::{crop_box, voxel_downsample};
pub use frame::{pca_frame, SurfaceFrame};
pub use index::{build_index, Neighbor, SpatialIndex};
pub use io::{load_cloud, save_ply, save_xyz, CloudFormat, PlyEncoding};
pub use normals::{estimate_normals, estimate_normals_at, NORMAL_TOLERANCE};
pub use transform::{apply_transform, estimate_rigid_transform, RigidTransform};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;

/// Euclidean distance, written out so every caller agrees bit for bit.
#[inline]
pub fn distance(a: &Point3, b: &Point3) -> f64 {
    distance_squared(a, b).sqrt()
}

#[inline]
pub fn distance_squared(a: &Point3, b: &Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}
