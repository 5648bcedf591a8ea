use std::path::Path;

use serde::{Deserialize, Serialize};

use sandbench_control::{PlantConfig, Vibration};
use sandbench_perception::PerceptionConfig;
use sandbench_planner::PlannerConfig;

use crate::{OrchestratorError, Result};

/// Disturbances switched on for the execution stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutionDisturbance {
    pub vibration: Vibration,
    /// Force sensor noise, N.
    pub sensor_noise: f64,
}

impl Default for ExecutionDisturbance {
    fn default() -> Self {
        ExecutionDisturbance {
            vibration: Vibration {
                amplitude: 1e-3,
                frequency: 10.0,
                axis: None,
            },
            sensor_noise: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub perception: PerceptionConfig,
    pub planner: PlannerConfig,
    /// Plant used by both simulation stages. Simulation runs it without
    /// noise or vibration; execution applies `execution` on top.
    pub plant: PlantConfig,
    pub execution: ExecutionDisturbance,
    /// Raster cell of the contact surface, meters.
    pub heightfield_cell: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            perception: PerceptionConfig::default(),
            planner: PlannerConfig::default(),
            plant: PlantConfig::default(),
            execution: ExecutionDisturbance::default(),
            heightfield_cell: 2e-3,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            OrchestratorError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| OrchestratorError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |e: &dyn std::fmt::Display| OrchestratorError::Config(e.to_string());
        self.perception.validate().map_err(|e| bad(&e))?;
        self.planner.validate().map_err(|e| bad(&e))?;
        self.plant.validate().map_err(|e| bad(&e))?;
        self.execution_plant().validate().map_err(|e| bad(&e))?;
        if !(self.heightfield_cell > 0.0 && self.heightfield_cell.is_finite()) {
            return Err(OrchestratorError::Config(format!(
                "heightfield_cell must be positive, got {}",
                self.heightfield_cell
            )));
        }
        Ok(())
    }

    pub fn simulation_plant(&self) -> PlantConfig {
        self.plant.undisturbed()
    }

    pub fn execution_plant(&self) -> PlantConfig {
        PlantConfig {
            vibration: self.execution.vibration,
            sensor_noise: self.execution.sensor_noise,
            ..self.plant
        }
    }
}
