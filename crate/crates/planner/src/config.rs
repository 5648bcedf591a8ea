use serde::{Deserialize, Serialize};

use crate::{PlannerError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    #[default]
    Linear,
    Spline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Distance between slicing planes, meters.
    pub stepover: f64,
    /// Half-width of the band selected around each plane. `None` uses 1.5×
    /// the median point spacing of the cloud.
    pub band_halfwidth: Option<f64>,
    pub waypoint_spacing: f64,
    /// Moving-average window over contour points; odd.
    pub smoothing_window: usize,
    /// Tilt of the tool about the travel direction, degrees.
    pub angle_of_attack_deg: f64,
    pub normal_k: usize,
    /// Approach and depart distance, meters.
    pub clearance: f64,
    /// Raster cell for the planarity check, meters.
    pub planarity_cell: f64,
    pub interpolation: Interpolation,
    /// Neighbors averaged by the optional height low-pass before planning;
    /// 0 disables it.
    pub lowpass_k: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            stepover: 0.02,
            band_halfwidth: None,
            waypoint_spacing: 0.005,
            smoothing_window: 5,
            angle_of_attack_deg: 2.0,
            normal_k: 16,
            clearance: 0.05,
            planarity_cell: 0.01,
            interpolation: Interpolation::Linear,
            lowpass_k: 0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PlannerError::InvalidParameter(m));
        for (name, value) in [
            ("stepover", self.stepover),
            ("waypoint_spacing", self.waypoint_spacing),
            ("clearance", self.clearance),
            ("planarity_cell", self.planarity_cell),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return bad(format!("{name} must be positive, got {value}"));
            }
        }
        if let Some(b) = self.band_halfwidth {
            if !(b > 0.0 && b.is_finite()) {
                return bad(format!("band_halfwidth must be positive, got {b}"));
            }
        }
        if self.smoothing_window == 0 || self.smoothing_window % 2 == 0 {
            return bad(format!(
                "smoothing_window must be odd, got {}",
                self.smoothing_window
            ));
        }
        if !(0.0..=15.0).contains(&self.angle_of_attack_deg) {
            return bad(format!(
                "angle of attack must lie in [0, 15] degrees, got {}",
                self.angle_of_attack_deg
            ));
        }
        if self.normal_k < 3 {
            return bad(format!("normal_k must be at least 3, got {}", self.normal_k));
        }
        Ok(())
    }
}
