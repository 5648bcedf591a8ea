use serde::{Deserialize, Serialize};

use crate::{ControlError, Result, Wrench};

/// Per-axis diagonal PID gains.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: Wrench,
    pub ki: Wrench,
    pub kd: Wrench,
    /// Derivative low-pass coefficient in [0, 1); 0 disables filtering.
    pub beta: f64,
    /// Bound on |integral| per axis.
    pub integral_clamp: Wrench,
}

impl PidGains {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ControlError::InvalidParameter(m));
        if !(0.0..1.0).contains(&self.beta) {
            return bad(format!("beta must lie in [0, 1), got {}", self.beta));
        }
        for i in 0..6 {
            let (kp, ki, kd, c) = (self.kp[i], self.ki[i], self.kd[i], self.integral_clamp[i]);
            if !(kp >= 0.0 && ki >= 0.0 && kd >= 0.0) || !(kp + ki + kd).is_finite() {
                return bad(format!("gains on axis {i} must be finite and non-negative"));
            }
            if ki > 0.0 && !(c > 0.0) {
                return bad(format!("axis {i} has integral gain but no positive clamp"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub integral: Wrench,
    pub prev_error: Wrench,
    pub filtered_derivative: Wrench,
    pub initialized: bool,
}

/// One controller update: rectangle-rule integral with clamping and a
/// low-passed backward-difference derivative.
pub fn pid_step(state: &PidState, e: &Wrench, dt: f64, gains: &PidGains) -> Result<(Wrench, PidState)> {
    if !(dt > 0.0) {
        return Err(ControlError::InvalidParameter(format!(
            "timestep must be positive, got {dt}"
        )));
    }
    let mut integral = state.integral + e * dt;
    for i in 0..6 {
        let c = gains.integral_clamp[i];
        if c > 0.0 {
            integral[i] = integral[i].clamp(-c, c);
        } else if gains.ki[i] == 0.0 {
            integral[i] = 0.0;
        }
    }
    let raw = if state.initialized {
        (e - state.prev_error) / dt
    } else {
        Wrench::zeros()
    };
    let filtered = state.filtered_derivative * gains.beta + raw * (1.0 - gains.beta);
    let u = gains.kp.component_mul(e) + gains.ki.component_mul(&integral) + gains.kd.component_mul(&filtered);
    Ok((
        u,
        PidState {
            integral,
            prev_error: *e,
            filtered_derivative: filtered,
            initialized: true,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gains(kp: f64, ki: f64, kd: f64) -> PidGains {
        PidGains {
            kp: Wrench::repeat(kp),
            ki: Wrench::repeat(ki),
            kd: Wrench::repeat(kd),
            beta: 0.0,
            integral_clamp: Wrench::repeat(1e9),
        }
    }

    #[test]
    fn zero_error_zero_output() {
        let (u, s) = pid_step(&PidState::default(), &Wrench::zeros(), 0.002, &gains(1.0, 2.0, 3.0)).unwrap();
        assert_eq!(u, Wrench::zeros());
        assert_eq!(s.integral, Wrench::zeros());
        assert_eq!(s.filtered_derivative, Wrench::zeros());
    }

    #[test]
    fn proportional_only() {
        let e = Wrench::new(0.0, 0.0, 2.0, 0.0, 0.0, 0.0);
        let (u, _) = pid_step(&PidState::default(), &e, 0.002, &gains(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(u[2], 2.0);
    }

    #[test]
    fn integral_is_clamped() {
        let mut g = gains(0.0, 1.0, 0.0);
        g.integral_clamp = Wrench::repeat(0.01);
        let mut s = PidState::default();
        for _ in 0..100 {
            s = pid_step(&s, &Wrench::repeat(1.0), 0.002, &g).unwrap().1;
        }
        assert_eq!(s.integral, Wrench::repeat(0.01));
    }

    #[test]
    fn rejects_bad_timestep_and_gains() {
        assert!(pid_step(&PidState::default(), &Wrench::zeros(), 0.0, &gains(1.0, 0.0, 0.0)).is_err());
        let mut g = gains(1.0, 1.0, 0.0);
        g.integral_clamp = Wrench::zeros();
        assert!(g.validate().is_err());
        g.beta = 1.0;
        assert!(g.validate().is_err());
    }
}
