use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use sandbench_geometry::{Point3, PointCloud, SurfaceFrame, Vector3};

use crate::{ControlError, Result, Wrench};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Vibration {
    /// Meters; zero disables the disturbance.
    pub amplitude: f64,
    pub frequency: f64,
    /// Direction of the workpiece motion; `None` moves it along the surface
    /// normal.
    pub axis: Option<[f64; 3]>,
}

impl Default for Vibration {
    fn default() -> Self {
        Vibration {
            amplitude: 0.0,
            frequency: 10.0,
            axis: None,
        }
    }
}

impl Vibration {
    /// Surface displacement along the frame normal at time `t`.
    pub fn offset(&self, t: f64, normal: &Vector3) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let along = match self.axis {
            Some(a) => Vector3::from(a).normalize().dot(normal),
            None => 1.0,
        };
        along * self.amplitude * (2.0 * std::f64::consts::PI * self.frequency * t).sin()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    /// N/m.
    pub contact_stiffness: f64,
    /// N·s/m, only while penetration grows.
    pub contact_damping: f64,
    /// Meters of tool offset per unit of controller output.
    pub admittance: f64,
    /// Abort threshold on any translational force component, N.
    pub force_limit: f64,
    pub vibration: Vibration,
    pub timestep: f64,
    /// Standard deviation of force sensor noise, N.
    pub sensor_noise: f64,
    /// Tool speed along the path, m/s.
    pub feed_rate: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            contact_stiffness: 2e4,
            contact_damping: 50.0,
            admittance: 2e-5,
            force_limit: 100.0,
            vibration: Vibration::default(),
            timestep: 0.002,
            sensor_noise: 0.05,
            feed_rate: 0.05,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ControlError::InvalidParameter(m));
        for (name, v) in [
            ("contact_stiffness", self.contact_stiffness),
            ("admittance", self.admittance),
            ("timestep", self.timestep),
            ("force_limit", self.force_limit),
            ("feed_rate", self.feed_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("contact_damping", self.contact_damping),
            ("sensor_noise", self.sensor_noise),
            ("vibration amplitude", self.vibration.amplitude),
            ("vibration frequency", self.vibration.frequency),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }

    /// Same plant without vibration or sensor noise.
    pub fn undisturbed(&self) -> Self {
        PlantConfig {
            vibration: Vibration {
                amplitude: 0.0,
                ..self.vibration
            },
            sensor_noise: 0.0,
            ..*self
        }
    }
}

/// Surface heights along the frame normal, averaged per raster cell and
/// bilinearly interpolated between cell centers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    pub frame: SurfaceFrame,
    pub cell: f64,
    origin: [i64; 2],
    dims: [usize; 2],
    heights: Vec<Option<f64>>,
}

impl HeightField {
    pub fn from_cloud(cloud: &PointCloud, frame: &SurfaceFrame, cell: f64) -> Result<Self> {
        if !(cell > 0.0 && cell.is_finite()) {
            return Err(ControlError::InvalidParameter(format!(
                "cell must be positive, got {cell}"
            )));
        }
        let mut sums: HashMap<[i64; 2], (f64, usize)> = HashMap::new();
        for p in &cloud.points {
            let l = frame.to_local(p);
            let key = [(l.x / cell).floor() as i64, (l.y / cell).floor() as i64];
            let e = sums.entry(key).or_insert((0.0, 0));
            e.0 += l.z;
            e.1 += 1;
        }
        if sums.is_empty() {
            return Err(ControlError::EmptySurface);
        }
        let min = [0, 1].map(|a| sums.keys().map(|k| k[a]).min().expect("non-empty"));
        let max = [0, 1].map(|a| sums.keys().map(|k| k[a]).max().expect("non-empty"));
        let dims = [(max[0] - min[0] + 1) as usize, (max[1] - min[1] + 1) as usize];
        let mut heights = vec![None; dims[0] * dims[1]];
        for (k, (sum, n)) in sums {
            let (i, j) = ((k[0] - min[0]) as usize, (k[1] - min[1]) as usize);
            heights[i * dims[1] + j] = Some(sum / n as f64);
        }
        fill_aliasing_holes(&mut heights, dims);
        Ok(HeightField {
            frame: *frame,
            cell,
            origin: min,
            dims,
            heights,
        })
    }

    fn at(&self, i: i64, j: i64) -> Option<f64> {
        let (a, b) = (i - self.origin[0], j - self.origin[1]);
        if a < 0 || b < 0 || a as usize >= self.dims[0] || b as usize >= self.dims[1] {
            return None;
        }
        self.heights[a as usize * self.dims[1] + b as usize]
    }

    /// Height at local `(u, v)`; `None` over holes and more than one cell
    /// outside the scan. Empty cells next to populated ones take the mean of
    /// those neighbors.
    pub fn height(&self, u: f64, v: f64) -> Option<f64> {
        let (ci, cj) = ((u / self.cell).floor() as i64, (v / self.cell).floor() as i64);
        let own = match self.at(ci, cj) {
            Some(h) => h,
            None => {
                let near: Vec<f64> = (-1..=1)
                    .flat_map(|di| (-1..=1).map(move |dj| (di, dj)))
                    .filter_map(|(di, dj)| self.at(ci + di, cj + dj))
                    .collect();
                if near.is_empty() {
                    return None;
                }
                near.iter().sum::<f64>() / near.len() as f64
            }
        };
        // Bilinear over the four cell centers around the query.
        let (gu, gv) = (u / self.cell - 0.5, v / self.cell - 0.5);
        let (i0, j0) = (gu.floor() as i64, gv.floor() as i64);
        let (fu, fv) = (gu - i0 as f64, gv - j0 as f64);
        match (
            self.at(i0, j0),
            self.at(i0 + 1, j0),
            self.at(i0, j0 + 1),
            self.at(i0 + 1, j0 + 1),
        ) {
            (Some(h00), Some(h10), Some(h01), Some(h11)) => Some(
                h00 * (1.0 - fu) * (1.0 - fv) + h10 * fu * (1.0 - fv) + h01 * (1.0 - fu) * fv + h11 * fu * fv,
            ),
            _ => Some(own),
        }
    }
}

/// Fills empty cells that have populated neighbors on both sides along a
/// grid axis, with the mean of their populated 8-neighbors. A cell about as
/// small as the point spacing leaves such single-cell gaps inside the scan;
/// gaps at the border and larger holes stay empty.
fn fill_aliasing_holes(heights: &mut [Option<f64>], dims: [usize; 2]) {
    let get = |h: &[Option<f64>], i: isize, j: isize| -> Option<f64> {
        if i < 0 || j < 0 || i as usize >= dims[0] || j as usize >= dims[1] {
            return None;
        }
        h[i as usize * dims[1] + j as usize]
    };
    let source = heights.to_vec();
    for i in 0..dims[0] as isize {
        for j in 0..dims[1] as isize {
            if source[i as usize * dims[1] + j as usize].is_some() {
                continue;
            }
            let bridged = (get(&source, i - 1, j).is_some() && get(&source, i + 1, j).is_some())
                || (get(&source, i, j - 1).is_some() && get(&source, i, j + 1).is_some());
            if !bridged {
                continue;
            }
            let (mut sum, mut n) = (0.0, 0);
            for di in -1..=1 {
                for dj in -1..=1 {
                    if let Some(h) = get(&source, i + di, j + dj) {
                        sum += h;
                        n += 1;
                    }
                }
            }
            heights[i as usize * dims[1] + j as usize] = Some(sum / n as f64);
        }
    }
}

/// Penetration of `tool` below the (possibly displaced) surface, along the
/// frame normal. `None` when the tool is off the scanned area.
pub fn penetration(tool: &Point3, surface: &HeightField, surface_offset: f64) -> Option<f64> {
    let l = surface.frame.to_local(tool);
    let h = surface.height(l.x, l.y)? + surface_offset;
    Some((h - l.z).max(0.0))
}

/// Spring-damper contact: `k_c·δ + c_d·max(0, δ̇)` pressing along tool z.
/// Damping only acts while in contact.
pub fn contact_force(penetration: f64, penetration_rate: f64, plant: &PlantConfig) -> Wrench {
    if penetration <= 0.0 {
        return Wrench::zeros();
    }
    let f = plant.contact_stiffness * penetration + plant.contact_damping * penetration_rate.max(0.0);
    Wrench::new(0.0, 0.0, f, 0.0, 0.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_field() -> HeightField {
        let pts = (0..21)
            .flat_map(|i| (0..21).map(move |j| Point3::new(i as f64 * 1e-3, j as f64 * 1e-3, 0.01)))
            .collect();
        let frame = SurfaceFrame {
            origin: Point3::origin(),
            u: Vector3::x(),
            v: Vector3::y(),
            n: Vector3::z(),
            extents: [0.02, 0.02],
        };
        HeightField::from_cloud(&PointCloud::new(pts), &frame, 2e-3).unwrap()
    }

    #[test]
    fn linear_law() {
        let w = contact_force(1e-3, 0.0, &PlantConfig::default());
        assert!((w[2] - 20.0).abs() < 1e-12);
        assert_eq!(contact_force(0.0, 5.0, &PlantConfig::default()), Wrench::zeros());
    }

    #[test]
    fn flat_heights_and_outside() {
        let f = flat_field();
        assert!((f.height(0.0101, 0.0057).unwrap() - 0.01).abs() < 1e-15);
        assert!(f.height(0.5, 0.0).is_none());
        // One cell beyond the edge still reads the border height.
        assert!((f.height(0.0225, 0.01).unwrap() - 0.01).abs() < 1e-15);
        assert!(f.height(0.0265, 0.01).is_none());
        let d = penetration(&Point3::new(0.01, 0.01, 0.009), &f, 0.0).unwrap();
        assert!((d - 1e-3).abs() < 1e-12);
        assert_eq!(penetration(&Point3::new(0.01, 0.01, 0.02), &f, 0.0), Some(0.0));
    }

    #[test]
    fn single_cell_gaps_are_filled() {
        // Rows of points at 2 mm with every other column missing in one row.
        let pts = (0..10)
            .flat_map(|i| (0..10).map(move |j| (i, j)))
            .filter(|&(i, j)| !(i == 4 && j == 5))
            .map(|(i, j)| Point3::new(i as f64 * 2e-3 + 1e-3, j as f64 * 2e-3 + 1e-3, 0.003))
            .collect();
        let frame = SurfaceFrame {
            origin: Point3::origin(),
            u: Vector3::x(),
            v: Vector3::y(),
            n: Vector3::z(),
            extents: [0.01, 0.01],
        };
        let f = HeightField::from_cloud(&PointCloud::new(pts), &frame, 2e-3).unwrap();
        assert!((f.height(4.0 * 2e-3 + 1e-3, 5.0 * 2e-3 + 1e-3).unwrap() - 0.003).abs() < 1e-15);
        assert!(f.height(0.05, 0.05).is_none());
    }

    #[test]
    fn vibration_projects_on_normal() {
        let v = Vibration {
            amplitude: 1e-3,
            frequency: 10.0,
            axis: Some([1.0, 0.0, 1.0]),
        };
        let quarter = 1.0 / 40.0;
        let d = v.offset(quarter, &Vector3::z());
        assert!((d - 1e-3 / 2f64.sqrt()).abs() < 1e-15);
    }
}
