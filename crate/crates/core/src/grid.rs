//! Frequency grids for conductivity sweeps.

use crate::error::{KuboError, Result};
use serde::{Deserialize, Serialize};

/// Strictly increasing list of real angular frequencies (energy/hbar units).
/// May be empty, in which case downstream results are empty too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.iter().any(|w| !w.is_finite()) {
            return Err(KuboError::InvalidInput("frequencies must be finite".into()));
        }
        if omegas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(KuboError::InvalidInput(
                "frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self { omegas })
    }

    /// Inclusive linear sweep with `count` points; `count = 1` requires
    /// `min == max`.
    pub fn linspace(min: f64, max: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Self::new(vec![]);
        }
        if count == 1 {
            if min != max {
                return Err(KuboError::InvalidInput(
                    "single-point sweep requires min == max".into(),
                ));
            }
            return Self::new(vec![min]);
        }
        let step = (max - min) / (count - 1) as f64;
        let mut v: Vec<f64> = (0..count).map(|i| min + step * i as f64).collect();
        // pin the endpoint exactly so sweeps hit requested values bit-for-bit
        v[count - 1] = max;
        Self::new(v)
    }

    pub fn single(omega: f64) -> Result<Self> {
        Self::new(vec![omega])
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}
