//! Deterministic stand-in for a laser line scanner.
//!
//! The surface is sampled on a regular `(a, b)` parameter grid: every value
//! of `a` is one scan line and `b` runs along the line. Defects are Gaussian
//! bumps (`depth > 0`) or dents (`depth < 0`) displaced along the surface
//! normal with standard deviation `radius / 2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use sandbench_geometry::{CloudMeta, LengthUnit, Point3, PointCloud, Vector3};

use crate::{PerceptionError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SurfaceKind {
    Plane,
    /// Concave trough; curvature runs across the scan lines, the cylinder
    /// axis along them.
    CylinderPatch { radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectSeed {
    /// Surface parameters `(a, b)` of the defect center, meters.
    pub center: [f64; 2],
    pub radius: f64,
    /// Signed amplitude along the normal; negative is a dent.
    pub depth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScanSpec {
    pub surface: SurfaceKind,
    /// Extent along `a` (across lines) and `b` (along lines), meters.
    pub size: [f64; 2],
    pub spacing: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub defects: Vec<DefectSeed>,
    /// Isolated points floating above the surface.
    #[serde(default)]
    pub spurious_points: usize,
    /// Height range of spurious points above the surface, meters.
    #[serde(default = "default_spurious_height")]
    pub spurious_height: [f64; 2],
    #[serde(default)]
    pub seed: u64,
}

fn default_spurious_height() -> [f64; 2] {
    [3e-3, 10e-3]
}

impl SyntheticScanSpec {
    pub fn plane(size: [f64; 2], spacing: f64) -> Self {
        Self {
            surface: SurfaceKind::Plane,
            size,
            spacing,
            noise_sigma: 0.0,
            defects: Vec::new(),
            spurious_points: 0,
            spurious_height: default_spurious_height(),
            seed: 0,
        }
    }

    pub fn cylinder(radius: f64, size: [f64; 2], spacing: f64) -> Self {
        Self {
            surface: SurfaceKind::CylinderPatch { radius },
            ..Self::plane(size, spacing)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthDefect {
    pub seed: DefectSeed,
    /// Undisplaced surface point under the defect center.
    pub center: Point3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScan {
    pub cloud: PointCloud,
    pub defects: Vec<GroundTruthDefect>,
    /// Ids of the injected spurious points within the cloud.
    pub spurious_ids: Vec<usize>,
}

impl SurfaceKind {
    /// Surface point and unit normal at parameters `(a, b)`.
    pub fn sample(&self, a: f64, b: f64) -> (Point3, Vector3) {
        match *self {
            SurfaceKind::Plane => (Point3::new(a, b, 0.0), Vector3::z()),
            SurfaceKind::CylinderPatch { radius } => {
                let theta = a / radius;
                (
                    Point3::new(radius * theta.sin(), b, radius * (1.0 - theta.cos())),
                    Vector3::new(-theta.sin(), 0.0, theta.cos()),
                )
            }
        }
    }
}

fn axis_samples(length: f64, spacing: f64) -> Vec<f64> {
    let count = (length / spacing + 1e-9).floor() as usize + 1;
    let span = (count - 1) as f64 * spacing;
    (0..count).map(|i| -span / 2.0 + i as f64 * spacing).collect()
}

pub fn make_synthetic_scan(spec: &SyntheticScanSpec) -> Result<SyntheticScan> {
    let bad = |m: String| Err(PerceptionError::InvalidParameter(m));
    if !(spec.spacing > 0.0) {
        return bad(format!("spacing must be positive, got {}", spec.spacing));
    }
    if !(spec.size[0] >= 0.0 && spec.size[1] >= 0.0) {
        return bad("size must be non-negative".into());
    }
    if !(spec.noise_sigma >= 0.0) {
        return bad("noise sigma must be non-negative".into());
    }
    if let SurfaceKind::CylinderPatch { radius } = spec.surface {
        if !(radius > 0.0) || spec.size[0] / 2.0 >= radius * std::f64::consts::FRAC_PI_2 {
            return bad("cylinder radius too small for the patch".into());
        }
    }
    if let Some(d) = spec.defects.iter().find(|d| !(d.radius > spec.spacing)) {
        return bad(format!(
            "defect radius {} must exceed spacing {}",
            d.radius, spec.spacing
        ));
    }
    if spec.spurious_points > 0 && !(spec.spurious_height[0] <= spec.spurious_height[1]) {
        return bad("spurious height range is inverted".into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma).expect("sigma checked");
    let a_values = axis_samples(spec.size[0], spec.spacing);
    let b_values = axis_samples(spec.size[1], spec.spacing);

    let mut points = Vec::with_capacity(a_values.len() * b_values.len() + spec.spurious_points);
    let mut lines = Vec::with_capacity(points.capacity());
    for (line, &a) in a_values.iter().enumerate() {
        for &b in &b_values {
            let (p, n) = spec.surface.sample(a, b);
            let mut offset = 0.0;
            for d in &spec.defects {
                let r2 = (a - d.center[0]).powi(2) + (b - d.center[1]).powi(2);
                let sigma = d.radius / 2.0;
                offset += d.depth * (-r2 / (2.0 * sigma * sigma)).exp();
            }
            if spec.noise_sigma > 0.0 {
                offset += noise.sample(&mut rng);
            }
            points.push(p + n * offset);
            lines.push(line as u32);
        }
    }

    // Spurious points form their own one-point scan lines appended at the end.
    let mut spurious_ids = Vec::with_capacity(spec.spurious_points);
    let next_line = a_values.len() as u32;
    for i in 0..spec.spurious_points {
        let a = rng.random_range(-spec.size[0] / 2.0..=spec.size[0] / 2.0);
        let b = rng.random_range(-spec.size[1] / 2.0..=spec.size[1] / 2.0);
        let h = rng.random_range(spec.spurious_height[0]..=spec.spurious_height[1]);
        let (p, n) = spec.surface.sample(a, b);
        spurious_ids.push(points.len());
        points.push(p + n * h);
        lines.push(next_line + i as u32);
    }

    let defects = spec
        .defects
        .iter()
        .map(|d| GroundTruthDefect {
            seed: *d,
            center: spec.surface.sample(d.center[0], d.center[1]).0,
        })
        .collect();

    let cloud = PointCloud {
        points,
        line_index: Some(lines),
        normals: None,
        meta: CloudMeta {
            source: format!("synthetic:{}", spec.seed),
            unit: LengthUnit::Meter,
            view_axis: Vector3::z(),
        },
    };
    Ok(SyntheticScan {
        cloud,
        defects,
        spurious_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_plane_grid() {
        let scan = make_synthetic_scan(&SyntheticScanSpec::plane([0.1, 0.1], 1e-3)).unwrap();
        assert_eq!(scan.cloud.len(), 101 * 101);
        assert!(scan.cloud.points.iter().all(|p| p.z == 0.0));
        assert_eq!(scan.cloud.lines().unwrap().len(), 101);
        scan.cloud.validate().unwrap();
    }

    #[test]
    fn dent_minimum_at_center() {
        let mut spec = SyntheticScanSpec::plane([0.1, 0.1], 1e-3);
        spec.defects.push(DefectSeed {
            center: [0.0, 0.0],
            radius: 10e-3,
            depth: -1e-3,
        });
        let scan = make_synthetic_scan(&spec).unwrap();
        let (i, min) = scan
            .cloud
            .points
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.z.total_cmp(&b.1.z))
            .unwrap();
        assert!((min.z + 1e-3).abs() < 1e-9);
        assert!(min.x.abs() < 1e-12 && min.y.abs() < 1e-12, "minimum at point {i}");
    }

    #[test]
    fn seeded_runs_are_identical() {
        let mut spec = SyntheticScanSpec::cylinder(2.0, [0.05, 0.08], 1e-3);
        spec.noise_sigma = 2e-5;
        spec.spurious_points = 5;
        spec.seed = 42;
        let a = make_synthetic_scan(&spec).unwrap();
        let b = make_synthetic_scan(&spec).unwrap();
        assert_eq!(a, b);
        spec.seed = 43;
        assert_ne!(a.cloud, make_synthetic_scan(&spec).unwrap().cloud);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_synthetic_scan(&SyntheticScanSpec::plane([0.1, 0.1], 0.0)).is_err());
        let mut spec = SyntheticScanSpec::plane([0.1, 0.1], 1e-3);
        spec.defects.push(DefectSeed {
            center: [0.0, 0.0],
            radius: 5e-4,
            depth: 1e-3,
        });
        assert!(matches!(
            make_synthetic_scan(&spec),
            Err(PerceptionError::InvalidParameter(_))
        ));
    }

    #[test]
    fn cylinder_points_lie_on_radius() {
        let scan = make_synthetic_scan(&SyntheticScanSpec::cylinder(2.0, [0.5, 0.02], 5e-3)).unwrap();
        for p in &scan.cloud.points {
            let r = (p.x * p.x + (p.z - 2.0).powi(2)).sqrt();
            assert!((r - 2.0).abs() < 1e-12);
        }
    }
}
