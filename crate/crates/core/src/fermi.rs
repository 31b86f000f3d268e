//! Equilibrium occupation functions and the chemical-potential solver.

use crate::error::{KuboError, Result};
use serde::{Deserialize, Serialize};

/// Inverse temperature plus either a chemical potential or a target particle
/// density. `beta = f64::INFINITY` is the T = 0 sentinel; it is accepted by
/// `fermi_dirac` but rejected by operations that need dPhi/dE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupationSpec {
    beta: f64,
    chem: ChemSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChemSpec {
    Mu(f64),
    Density(f64),
}

impl OccupationSpec {
    pub fn with_mu(beta: f64, mu: f64) -> Result<Self> {
        Self::check_beta(beta)?;
        if !mu.is_finite() {
            return Err(KuboError::InvalidInput("mu must be finite".into()));
        }
        Ok(Self { beta, chem: ChemSpec::Mu(mu) })
    }

    pub fn with_density(beta: f64, density: f64) -> Result<Self> {
        Self::check_beta(beta)?;
        if !(density.is_finite() && density > 0.0) {
            return Err(KuboError::InvalidInput(format!(
                "target density must be positive and finite, got {density}"
            )));
        }
        Ok(Self { beta, chem: ChemSpec::Density(density) })
    }

    fn check_beta(beta: f64) -> Result<()> {
        if beta.is_nan() || beta <= 0.0 {
            return Err(KuboError::InvalidInput(format!(
                "beta must be positive (or +inf for T = 0), got {beta}"
            )));
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn chem(&self) -> ChemSpec {
        self.chem
    }

    /// True when the T = 0 sentinel is set.
    pub fn is_zero_temperature(&self) -> bool {
        self.beta.is_infinite()
    }

    /// The chemical potential: either the given one, or the one solving
    /// density(mu) = target on the supplied spectrum.
    pub fn resolve_mu(&self, energies: &[f64], volume: f64) -> Result<f64> {
        match self.chem {
            ChemSpec::Mu(mu) => Ok(mu),
            ChemSpec::Density(target) => solve_mu(energies, volume, target, self.beta),
        }
    }
}

/// Fermi-Dirac occupation 1/(e^{beta(E-mu)} + 1), overflow-safe on both
/// tails. At the T = 0 sentinel it is the step: 1 below mu, 0 above, 1/2 at
/// mu. Total function with values in [0, 1].
pub fn fermi_dirac(e: f64, beta: f64, mu: f64) -> f64 {
    if beta.is_infinite() {
        return match e.partial_cmp(&mu) {
            Some(std::cmp::Ordering::Less) => 1.0,
            Some(std::cmp::Ordering::Greater) => 0.0,
            _ => 0.5,
        };
    }
    let x = beta * (e - mu);
    if x > 0.0 {
        let t = (-x).exp();
        t / (1.0 + t)
    } else {
        1.0 / (x.exp() + 1.0)
    }
}

/// dPhi/dE = -beta * Phi * (1 - Phi), computed as
/// -beta * e^{-|x|} / (1 + e^{-|x|})^2 so both tails underflow gracefully.
/// Always <= 0. T = 0 has no finite derivative and is rejected.
pub fn fermi_derivative(e: f64, beta: f64, mu: f64) -> Result<f64> {
    if beta.is_infinite() {
        return Err(KuboError::ZeroTemperatureUnsupported);
    }
    let x = beta * (e - mu);
    let t = (-x.abs()).exp();
    let s = 1.0 + t;
    Ok(-beta * t / (s * s))
}

/// Symmetric divided difference of the Fermi function,
/// (Phi(e_b) - Phi(e_a)) / (e_b - e_a), falling back to dPhi/dE(e_a) when
/// |e_b - e_a| <= eps_deg. This is the weight entering every conductivity
/// formula; trace and Bloch routes share it so their branch decisions agree
/// bit-for-bit.
pub fn fermi_divided_difference(
    e_a: f64,
    e_b: f64,
    beta: f64,
    mu: f64,
    eps_deg: f64,
) -> Result<f64> {
    if (e_b - e_a).abs() > eps_deg {
        if beta.is_infinite() {
            return Err(KuboError::ZeroTemperatureUnsupported);
        }
        Ok((fermi_dirac(e_b, beta, mu) - fermi_dirac(e_a, beta, mu)) / (e_b - e_a))
    } else {
        fermi_derivative(e_a, beta, mu)
    }
}

/// Solves (1/volume) * sum_i Phi(E_i; beta, mu) = target for mu by bisection
/// on the bracket [min E - 50/beta, max E + 50/beta]. The counting function
/// is strictly increasing in mu, so the root is unique.
pub fn solve_mu(energies: &[f64], volume: f64, target: f64, beta: f64) -> Result<f64> {
    if energies.is_empty() {
        return Err(KuboError::InvalidInput("empty spectrum".into()));
    }
    if !(volume.is_finite() && volume > 0.0) {
        return Err(KuboError::InvalidInput(format!("volume must be positive, got {volume}")));
    }
    if beta.is_nan() || beta <= 0.0 || beta.is_infinite() {
        return Err(KuboError::InvalidInput(format!(
            "solve_mu requires finite positive beta, got {beta}"
        )));
    }
    let max_density = energies.len() as f64 / volume;
    if !(target > 0.0 && target < max_density) {
        return Err(KuboError::DensityOutOfRange { target, min: 0.0, max: max_density });
    }
    let density = |mu: f64| -> f64 {
        energies.iter().map(|&e| fermi_dirac(e, beta, mu)).sum::<f64>() / volume
    };
    let (emin, emax) = energies
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, &e| (acc.0.min(e), acc.1.max(e)));
    let mut lo = emin - 50.0 / beta;
    let mut hi = emax + 50.0 / beta;
    const REL_TOL: f64 = 1e-10;
    const MAX_STEPS: usize = 200;
    for _ in 0..MAX_STEPS {
        let mid = 0.5 * (lo + hi);
        let rho = density(mid);
        if ((rho - target) / target).abs() <= REL_TOL {
            return Ok(mid);
        }
        if rho < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(KuboError::NoConvergence(format!(
        "chemical potential bisection: 200 steps, target density {target}"
    )))
}

/// Maxwellian phase-space density N~ * (beta / 2 pi m)^{d/2} e^{-beta p^2/2m};
/// integrates over momentum to the particle density N~.
pub fn maxwellian(p: &[f64], beta: f64, density: f64, mass: f64) -> f64 {
    let d = p.len() as f64;
    let p2: f64 = p.iter().map(|v| v * v).sum();
    let norm = (beta / (2.0 * std::f64::consts::PI * mass)).powf(0.5 * d);
    density * norm * (-beta * p2 / (2.0 * mass)).exp()
}
