use serde::{Deserialize, Serialize};

use crate::{PerceptionError, Result};

/// Which detector runs on the raw cloud.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageOrder {
    /// Outlier removal cleans the cloud before lines are fitted.
    #[default]
    SorFirst,
    /// Both detectors see the raw cloud; candidates removed by SOR are dropped.
    RegressionFirst,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerceptionConfig {
    pub poly_degree: usize,
    /// Meters.
    pub residual_threshold_abs: f64,
    pub robust_iterations: usize,
    pub sor_k: usize,
    pub sor_multiplier: f64,
    /// Meters.
    pub cluster_radius: f64,
    pub cluster_min_points: usize,
    pub order: StageOrder,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            poly_degree: 1,
            residual_threshold_abs: 3e-4,
            robust_iterations: 3,
            sor_k: 16,
            sor_multiplier: 2.0,
            cluster_radius: 5e-3,
            cluster_min_points: 10,
            order: StageOrder::SorFirst,
        }
    }
}

impl PerceptionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(PerceptionError::InvalidParameter(msg.to_string()));
        if !(1..=3).contains(&self.poly_degree) {
            return bad("poly_degree must be between 1 and 3");
        }
        if !(self.residual_threshold_abs > 0.0) {
            return bad("residual_threshold_abs must be positive");
        }
        if self.robust_iterations < 1 {
            return bad("robust_iterations must be at least 1");
        }
        if self.sor_k < 3 {
            return bad("sor_k must be at least 3");
        }
        if !(self.sor_multiplier > 0.0) {
            return bad("sor_multiplier must be positive");
        }
        if !(self.cluster_radius > 0.0) {
            return bad("cluster_radius must be positive");
        }
        if self.cluster_min_points < 1 {
            return bad("cluster_min_points must be positive");
        }
        Ok(())
    }
}
