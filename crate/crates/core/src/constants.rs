//! Physical constants threaded explicitly through every formula.

use crate::error::{KuboError, Result};
use serde::{Deserialize, Serialize};

/// Unit system for a run. Defaults give reduced units hbar = e = m = 1;
/// SI values can be injected since no formula hardcodes the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Reduced Planck constant (action).
    pub hbar: f64,
    /// Elementary charge magnitude.
    pub e_charge: f64,
    /// Particle mass, used by free/continuum models only.
    pub mass: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { hbar: 1.0, e_charge: 1.0, mass: 1.0 }
    }
}

impl PhysicalConstants {
    /// All three constants must be strictly positive and finite.
    pub fn new(hbar: f64, e_charge: f64, mass: f64) -> Result<Self> {
        for (name, v) in [("hbar", hbar), ("e_charge", e_charge), ("mass", mass)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(KuboError::InvalidInput(format!(
                    "constant {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self { hbar, e_charge, mass })
    }
}
