use crate::{PidGains, PlantConfig, Wrench};

/// Proportional gain of the translational loop, per unit of plant gain.
pub const DEFAULT_KP: f64 = 0.3;
/// Integral gain per unit of plant gain, 1/s.
pub const DEFAULT_KI: f64 = 300.0;
pub const DEFAULT_KD: f64 = 0.0;
pub const DEFAULT_BETA: f64 = 0.9;
/// N·s.
pub const DEFAULT_INTEGRAL_CLAMP: f64 = 1.0;

/// Default gains on tool z, divided by the plant loop gain
/// `contact_stiffness · admittance`. The other axes stay at zero: the plant
/// has no stiffness there, so gains would only integrate sensor noise into
/// tool drift.
pub fn tune_gains_default(plant: &PlantConfig) -> PidGains {
    let loop_gain = plant.contact_stiffness * plant.admittance;
    let axes = |g: f64| Wrench::new(0.0, 0.0, g / loop_gain, 0.0, 0.0, 0.0);
    PidGains {
        kp: axes(DEFAULT_KP),
        ki: axes(DEFAULT_KI),
        kd: axes(DEFAULT_KD),
        beta: DEFAULT_BETA,
        integral_clamp: Wrench::repeat(DEFAULT_INTEGRAL_CLAMP),
    }
}
