use serde::{Deserialize, Serialize};

use crate::error::{Result, WallError};

/// Physical parameters of the strip energy.
///
/// `gamma` weights the boundary anisotropy, `h` is the applied field and
/// `k` the winding class: the wall connects `k*pi` at the left end to `0`
/// at the right end.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallParams {
    pub gamma: f64,
    pub h: f64,
    pub k: i32,
}

impl WallParams {
    pub fn new(gamma: f64, h: f64, k: i32) -> Result<Self> {
        let p = WallParams { gamma, h, k };
        p.validate()?;
        Ok(p)
    }

    /// Checks `gamma > 0` and `h >= 0`. The winding class is checked by the
    /// solvers, which are the only consumers that care about it.
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(WallError::InvalidParams(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.h.is_finite() && self.h >= 0.0) {
            return Err(WallError::InvalidParams(format!(
                "h must be non-negative, got {}",
                self.h
            )));
        }
        Ok(())
    }

    /// Value of the left Dirichlet cap.
    pub fn left_value(&self) -> f64 {
        self.k as f64 * std::f64::consts::PI
    }

    /// Lower and upper clamp bounds `[min(0, k pi), max(0, k pi)]`.
    pub fn clamp_range(&self) -> (f64, f64) {
        let a = self.left_value();
        (a.min(0.0), a.max(0.0))
    }

    /// The winding class that minimizes over all classes for this field:
    /// one for zero field, two for a positive field.
    pub fn minimal_class(&self) -> i32 {
        if self.h > 0.0 {
            2
        } else {
            1
        }
    }
}
