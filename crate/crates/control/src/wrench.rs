use nalgebra::Vector6;
use serde::{Deserialize, Serialize};

use crate::{ControlError, Result};

/// Forces (N) then torques (N·m), in the tool frame.
pub type Wrench = Vector6<f64>;

/// Axis-aligned box of admissible wrenches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegionBounds", into = "RegionBounds")]
pub struct WrenchRegion {
    lo: Wrench,
    hi: Wrench,
}

#[derive(Serialize, Deserialize)]
struct RegionBounds {
    lo: [f64; 6],
    hi: [f64; 6],
}

impl TryFrom<RegionBounds> for WrenchRegion {
    type Error = ControlError;

    fn try_from(b: RegionBounds) -> Result<Self> {
        WrenchRegion::new(Wrench::from(b.lo), Wrench::from(b.hi))
    }
}

impl From<WrenchRegion> for RegionBounds {
    fn from(r: WrenchRegion) -> Self {
        RegionBounds {
            lo: r.lo.into(),
            hi: r.hi.into(),
        }
    }
}

impl WrenchRegion {
    pub fn new(lo: Wrench, hi: Wrench) -> Result<Self> {
        for i in 0..6 {
            if !(lo[i].is_finite() && hi[i].is_finite() && lo[i] <= hi[i]) {
                return Err(ControlError::InvalidParameter(format!(
                    "region axis {i}: lo {} must not exceed hi {}",
                    lo[i], hi[i]
                )));
            }
        }
        Ok(WrenchRegion { lo, hi })
    }

    /// Region collapsed to a single wrench.
    pub fn point(w: Wrench) -> Result<Self> {
        Self::new(w, w)
    }

    /// Pressing force along tool z, nothing else.
    pub fn normal_force(fz: f64) -> Result<Self> {
        Self::point(Wrench::new(0.0, 0.0, fz, 0.0, 0.0, 0.0))
    }

    pub fn lo(&self) -> &Wrench {
        &self.lo
    }

    pub fn hi(&self) -> &Wrench {
        &self.hi
    }

    pub fn contains(&self, w: &Wrench) -> bool {
        (0..6).all(|i| self.lo[i] <= w[i] && w[i] <= self.hi[i])
    }

    /// Force setpoint along tool z; the middle of the z interval.
    pub fn setpoint_z(&self) -> f64 {
        0.5 * (self.lo[2] + self.hi[2])
    }
}

/// Signed per-axis distance from `measured` to the region; zero inside, so
/// `measured + error` is the nearest admissible wrench.
pub fn wrench_region_error(measured: &Wrench, region: &WrenchRegion) -> Wrench {
    Wrench::from_fn(|i, _| {
        let w = measured[i];
        if w < region.lo[i] {
            region.lo[i] - w
        } else if w > region.hi[i] {
            region.hi[i] - w
        } else {
            0.0
        }
    })
}
