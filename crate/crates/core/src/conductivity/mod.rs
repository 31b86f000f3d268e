//! Conductivity evaluation: the finite-volume trace route, the
//! Brillouin-zone band route with its Drude/regular split, and the
//! effective-mass tensor forms. All routes share one pair-weight kernel so
//! their degeneracy branch decisions agree bit-for-bit.

mod bloch;
mod effective_mass;
mod trace;

pub use bloch::{band_data, conductivity_bloch, drude_part, regular_part, BandData, BzGrid};
pub use effective_mass::{effective_mass, EffectiveMassTensor, MassForm};
pub use trace::{conductivity_trace, gradient_fermi};

use crate::error::{KuboError, Result};
use crate::fermi::{fermi_derivative, fermi_divided_difference};
use ndarray::Array2;
use num_complex::Complex64;

/// Relaxation rate of the dissipative term. Gamma must be strictly positive:
/// the Liouvillian resolvent is singular on stationary states at omega = 0
/// otherwise.
#[derive(Debug, Clone, Copy)]
pub struct DissipationSpec {
    gamma: f64,
    eps_deg: Option<f64>,
}

impl DissipationSpec {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(KuboError::NonPositiveGamma(gamma));
        }
        Ok(Self { gamma, eps_deg: None })
    }

    /// Overrides the default degeneracy tolerance.
    pub fn with_eps_deg(gamma: f64, eps_deg: f64) -> Result<Self> {
        let mut spec = Self::new(gamma)?;
        if !(eps_deg.is_finite() && eps_deg > 0.0) {
            return Err(KuboError::InvalidInput(format!(
                "degeneracy tolerance must be positive, got {eps_deg}"
            )));
        }
        spec.eps_deg = Some(eps_deg);
        Ok(spec)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Degeneracy tolerance for a spectrum of the given radius. The default
    /// 1e-8 * max(1, radius) separates the divided-difference branch from
    /// the dPhi/dE branch well above eigensolver noise and well below any
    /// physical level spacing.
    pub fn eps_for(&self, spectral_radius: f64) -> f64 {
        self.eps_deg.unwrap_or(1e-8 * spectral_radius.max(1.0))
    }
}

/// The scalar part of one ordered eigenpair's contribution to the response
/// sum. Every route (trace, Bloch, closed-form honeycomb) obtains both the
/// occupation factor and the resolvent denominator from here, which makes
/// the Drude/regular routing identical across routes.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairWeights {
    beta: f64,
    mu: f64,
    eps_deg: f64,
    hbar: f64,
    gamma: f64,
}

impl PairWeights {
    pub fn new(beta: f64, mu: f64, eps_deg: f64, hbar: f64, gamma: f64) -> Result<Self> {
        if beta.is_infinite() {
            return Err(KuboError::ZeroTemperatureUnsupported);
        }
        Ok(Self { beta, mu, eps_deg, hbar, gamma })
    }

    /// True when the ordered pair is routed to the degenerate (Drude)
    /// branch.
    pub fn degenerate(&self, e_a: f64, e_b: f64) -> bool {
        (e_b - e_a).abs() <= self.eps_deg
    }

    /// Occupation factor and denominator frequency for the pair (a, b):
    /// returns (dPhi, dE/hbar). On the degenerate branch dPhi is the Fermi
    /// derivative at e_a and dE/hbar is forced to exactly zero, so the
    /// denominator below becomes exactly gamma - i omega there; this is what
    /// makes the Drude + regular partition exact.
    pub fn terms(&self, e_a: f64, e_b: f64) -> (f64, f64) {
        let dphi = fermi_divided_difference(e_a, e_b, self.beta, self.mu, self.eps_deg)
            .expect("finite beta enforced at construction");
        let de_over_hbar =
            if self.degenerate(e_a, e_b) { 0.0 } else { (e_b - e_a) / self.hbar };
        (dphi, de_over_hbar)
    }

    /// dPhi / (gamma + i (dE/hbar - omega)), the full scalar weight.
    pub fn weight(&self, dphi: f64, de_over_hbar: f64, omega: f64) -> Complex64 {
        Complex64::new(dphi, 0.0) / Complex64::new(self.gamma, de_over_hbar - omega)
    }

    /// Fermi derivative at energy e (the Drude occupation factor).
    pub fn phi_prime(&self, e: f64) -> f64 {
        fermi_derivative(e, self.beta, self.mu).expect("finite beta enforced at construction")
    }

}

/// Applies the resolvent of (L_H - i omega + gamma) to a matrix expressed in
/// the eigenbasis of H: entry (a, b) is divided by
/// (i/hbar)(E_a - E_b) - i omega + gamma. The forward operator is
/// L_H M = (i/hbar)(HM - MH), so resolvent-then-forward returns the input
/// exactly; the denominator never vanishes for gamma > 0.
pub fn apply_liouvillian_resolvent(
    m: &Array2<Complex64>,
    energies: &[f64],
    omega: f64,
    gamma: &DissipationSpec,
    hbar: f64,
) -> Array2<Complex64> {
    let g = gamma.gamma();
    let mut out = m.clone();
    for ((a, b), v) in out.indexed_iter_mut() {
        *v /= Complex64::new(g, (energies[a] - energies[b]) / hbar - omega);
    }
    out
}
