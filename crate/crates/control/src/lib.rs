//! Hybrid force-position control against a simulated compliant contact.
//!
//! The controller turns the distance between the measured wrench and an
//! admissible wrench box into a PID output, scales it by the plant
//! admittance and accumulates it as a tool offset on top of the planned
//! path. The plant is a spring-damper over a height field of the scan with
//! optional workpiece vibration and force sensor noise.

mod error;
mod io;
mod metrics;
mod pid;
mod plant;
mod sim;
mod tune;
mod wrench;

pub use error::{ControlError, Result};
pub use io::{write_trajectory_csv, TRAJECTORY_COLUMNS};
pub use metrics::{control_metrics, ControlMetrics};
pub use pid::{pid_step, PidGains, PidState};
pub use plant::{contact_force, penetration, HeightField, PlantConfig, Vibration};
pub use sim::{
    simulate_execution, Failure, FailureReason, SimulationOutput, Trajectory, TrajectorySample,
};
pub use tune::{
    tune_gains_default, DEFAULT_BETA, DEFAULT_INTEGRAL_CLAMP, DEFAULT_KD, DEFAULT_KI, DEFAULT_KP,
};
pub use wrench::{wrench_region_error, Wrench, WrenchRegion};
