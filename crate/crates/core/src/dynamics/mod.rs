//! Stochastic time-domain estimators of the averaged current density.
//!
//! The dissipative dynamics is piecewise deterministic: the state evolves
//! freely under the applied field, and at Poisson-distributed times it is
//! reset to equilibrium. The simulators here average the current over that
//! process directly - exactly per interval where a closed form exists
//! (constant field, and the classical gas), by fixed-step integration
//! otherwise - and report Monte Carlo standard errors. They share nothing
//! with the spectral conductivity routes except the equilibrium state, so
//! agreement within error bars validates those formulas from the defining
//! process rather than restating them.

mod classical;
mod quantum;

pub use classical::{simulate_classical, ClassicalCurrentEstimate};
pub use quantum::{
    simulate_quantum_ac, simulate_quantum_dc, AcCurrentEstimate, DcCurrentEstimate,
};

use crate::error::{KuboError, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default phase-average quadrature order of [`DriveSpec`].
pub const DEFAULT_THETA_NODES: usize = 8;

/// Uniform weighted node averages on the circle are exact for trigonometric
/// polynomials of degree below the node count; four nodes is the least that
/// isolates the linear response from the equilibrium term and the leading
/// harmonics above it.
const MIN_THETA_NODES: usize = 4;

/// Poisson scattering clock: independent exponential waiting times with
/// mean 1/gamma, drawn reproducibly from a seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringProcess {
    gamma: f64,
    seed: u64,
    n_events: usize,
    burn_in: usize,
}

impl ScatteringProcess {
    pub fn new(gamma: f64, seed: u64, n_events: usize) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(KuboError::NonPositiveGamma(gamma));
        }
        if n_events == 0 {
            return Err(KuboError::InvalidInput("n_events must be at least 1".into()));
        }
        Ok(Self { gamma, seed, n_events, burn_in: 0 })
    }

    /// Skips the first `burn_in` intervals of the stream. The retained
    /// intervals keep their absolute stream indices, so a run with burn-in
    /// sees exactly the tail of the corresponding run without it.
    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_events(&self) -> usize {
        self.n_events
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }
}

/// Applied-field description for the time-domain simulators: a real
/// amplitude per direction, the drive frequency, and the quadrature order
/// of the phase average. The `dc` path drives with the constant amplitude
/// and skips demodulation and phase averaging entirely.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSpec {
    amplitude: Vec<f64>,
    omega: f64,
    theta_nodes: usize,
    dc: bool,
    phase_average: bool,
}

impl DriveSpec {
    /// Harmonic drive at frequency `omega` with the default node count.
    pub fn ac(amplitude: Vec<f64>, omega: f64) -> Result<Self> {
        Self::check_amplitude(&amplitude)?;
        if !omega.is_finite() {
            return Err(KuboError::InvalidInput(format!("omega must be finite, got {omega}")));
        }
        Ok(Self {
            amplitude,
            omega,
            theta_nodes: DEFAULT_THETA_NODES,
            dc: false,
            phase_average: true,
        })
    }

    /// Constant drive.
    pub fn dc(amplitude: Vec<f64>) -> Result<Self> {
        Self::check_amplitude(&amplitude)?;
        Ok(Self {
            amplitude,
            omega: 0.0,
            theta_nodes: DEFAULT_THETA_NODES,
            dc: true,
            phase_average: true,
        })
    }

    /// Overrides the phase-average order. The weighted node average kills
    /// every response order p with p - 1 not divisible by M, so M = 4
    /// already isolates the linear term; the default 8 pushes the first
    /// surviving contamination to ninth order in the field.
    pub fn with_theta_nodes(mut self, m: usize) -> Result<Self> {
        if m < MIN_THETA_NODES {
            return Err(KuboError::InvalidInput(format!(
                "theta_nodes must be at least {MIN_THETA_NODES}, got {m}"
            )));
        }
        self.theta_nodes = m;
        Ok(self)
    }

    /// Experimental: drive at the single phase theta = 0 instead of
    /// averaging. The harmonic estimate then converges only through the
    /// long-time average, which suppresses the off-frequency terms slowly
    /// rather than cancelling them exactly; no accuracy claim is made.
    pub fn without_phase_average(mut self) -> Self {
        self.phase_average = false;
        self
    }

    fn check_amplitude(amplitude: &[f64]) -> Result<()> {
        if amplitude.is_empty() {
            return Err(KuboError::InvalidInput("field amplitude is empty".into()));
        }
        if amplitude.iter().any(|e| !e.is_finite()) {
            return Err(KuboError::InvalidInput("field amplitude must be finite".into()));
        }
        Ok(())
    }

    pub fn amplitude(&self) -> &[f64] {
        &self.amplitude
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn theta_nodes(&self) -> usize {
        self.theta_nodes
    }

    pub fn is_dc(&self) -> bool {
        self.dc
    }

    pub fn phase_average(&self) -> bool {
        self.phase_average
    }
}

/// The interval stream tau_0, tau_1, ... of a process: inverse-CDF
/// exponential draws with mean 1/gamma, one independent counter-based RNG
/// stream per interval index. Any window of the stream can therefore be
/// reproduced without drawing its prefix, and worker scheduling cannot
/// reorder it. Returns `n_events` values starting at index `burn_in`.
pub fn draw_intervals(process: &ScatteringProcess) -> Vec<f64> {
    (0..process.n_events)
        .map(|i| interval_at(process, process.burn_in as u64 + i as u64))
        .collect()
}

fn interval_at(process: &ScatteringProcess, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(process.seed);
    rng.set_stream(index);
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / process.gamma
}

/// Cap on the number of batches in the batch-means error estimate; fewer
/// batches than this are used only when there are fewer intervals.
const MAX_BATCHES: usize = 25;

pub(crate) struct RatioEstimate {
    pub ratio: Vec<Complex64>,
    pub stderr: Vec<f64>,
    pub total_weight: f64,
}

/// Grand ratio (sum of contributions)/(sum of weights) per component, with
/// a batch-means standard error: the intervals split into up to
/// [`MAX_BATCHES`] consecutive batches, each forms its own ratio, and the
/// spread of the batch ratios estimates the error of the grand ratio. The
/// batch structure also keeps the error honest when contributions carry
/// weak serial correlation through absolute start times. All sums run in
/// index order, so the result does not depend on the worker count that
/// produced `contribs`. A single interval has no spread; its standard
/// error is infinite.
pub(crate) fn ratio_estimate(
    contribs: &[Vec<Complex64>],
    weights: &[f64],
    d: usize,
) -> RatioEstimate {
    let n = weights.len();
    assert_eq!(contribs.len(), n, "one contribution per interval");
    let b = n.min(MAX_BATCHES);
    let mut num = vec![Complex64::default(); d];
    let mut den = 0.0;
    let mut batch_ratios: Vec<Vec<Complex64>> = Vec::with_capacity(b);
    for j in 0..b {
        let (lo, hi) = (j * n / b, (j + 1) * n / b);
        let mut bn = vec![Complex64::default(); d];
        let mut bd = 0.0;
        for i in lo..hi {
            for l in 0..d {
                bn[l] += contribs[i][l];
            }
            bd += weights[i];
        }
        for l in 0..d {
            num[l] += bn[l];
        }
        den += bd;
        batch_ratios.push(bn.iter().map(|v| v / bd).collect());
    }
    let ratio: Vec<Complex64> = num.iter().map(|v| v / den).collect();
    let stderr: Vec<f64> = if b >= 2 {
        (0..d)
            .map(|l| {
                let mean = batch_ratios.iter().map(|r| r[l]).sum::<Complex64>() / b as f64;
                let var: f64 =
                    batch_ratios.iter().map(|r| (r[l] - mean).norm_sqr()).sum::<f64>();
                (var / ((b - 1) as f64 * b as f64)).sqrt()
            })
            .collect()
    } else {
        vec![f64::INFINITY; d]
    };
    RatioEstimate { ratio, stderr, total_weight: den }
}
