//! Classical kinetic estimator: free carriers accelerated by the field
//! between Poisson resets. The per-interval current integral has a closed
//! form, so the Monte Carlo reduces to averaging an exact function of the
//! interval lengths; everything else about the estimator (ratio form,
//! batch-means errors) matches the quantum simulators.

use super::{draw_intervals, ratio_estimate, DriveSpec, ScatteringProcess};
use crate::constants::PhysicalConstants;
use crate::error::{KuboError, Result};
use num_complex::Complex64;

/// Monte Carlo estimate of the averaged classical current, its batch-means
/// standard error, and the closed-form value e^2 N E / (m (gamma - i omega))
/// it converges to.
#[derive(Debug, Clone)]
pub struct ClassicalCurrentEstimate {
    pub current: Vec<Complex64>,
    pub stderr: Vec<f64>,
    /// The drift current of the limiting process, for direct comparison.
    pub analytic: Vec<Complex64>,
    pub n_events: usize,
    pub total_time: f64,
}

/// Averages the classical drift current over the scattering process.
///
/// Each reset returns the gas to an equilibrium momentum distribution,
/// which is even, so only the field-induced drift accumulated since the
/// last reset carries current: J(t_n + s) = (e^2 density / mass) times the
/// running field integral. For both the constant and the harmonic drive
/// the demodulated interval contribution is tau^2 * ramp_integral(omega
/// tau) times the amplitude, an exact expression the estimator averages
/// over the drawn intervals. `beta` is validated but does not enter: every
/// even momentum distribution yields the same drift response.
pub fn simulate_classical(
    process: &ScatteringProcess,
    beta: f64,
    density: f64,
    mass: f64,
    drive: &DriveSpec,
    constants: &PhysicalConstants,
) -> Result<ClassicalCurrentEstimate> {
    if beta.is_nan() || beta <= 0.0 {
        return Err(KuboError::InvalidInput(format!(
            "beta must be positive (or +inf for T = 0), got {beta}"
        )));
    }
    if !(density.is_finite() && density > 0.0) {
        return Err(KuboError::InvalidInput(format!(
            "carrier density must be positive and finite, got {density}"
        )));
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(KuboError::InvalidInput(format!(
            "carrier mass must be positive and finite, got {mass}"
        )));
    }
    let d = drive.amplitude().len();
    let omega = if drive.is_dc() { 0.0 } else { drive.omega() };
    let prefactor = constants.e_charge * constants.e_charge * density / mass;

    let taus = draw_intervals(process);
    // the phase of the drive at the interval start cancels against the
    // demodulation weight, so each contribution depends on tau alone
    let contribs: Vec<Vec<Complex64>> = taus
        .iter()
        .map(|&tau| {
            let shape = tau * tau * ramp_integral(omega * tau);
            drive.amplitude().iter().map(|&e| shape * e).collect()
        })
        .collect();
    let est = ratio_estimate(&contribs, &taus, d);

    let denom = Complex64::new(process.gamma(), -omega);
    let analytic: Vec<Complex64> =
        drive.amplitude().iter().map(|&e| prefactor * e / denom).collect();
    Ok(ClassicalCurrentEstimate {
        current: est.ratio.iter().map(|z| prefactor * z).collect(),
        stderr: est.stderr.iter().map(|s| prefactor * s).collect(),
        analytic,
        n_events: taus.len(),
        total_time: est.total_weight,
    })
}

/// h(x) = integral_0^1 (1 - v) e^{i x v} dv, the shape of one interval's
/// demodulated current integral: the ramp response to the field accumulated
/// since the last reset, so that the contribution of an interval of length
/// tau is tau^2 h(omega tau). h(0) = 1/2 reproduces the constant-field
/// ramp. Evaluated by series near zero because the closed form loses all
/// digits to cancellation there.
fn ramp_integral(x: f64) -> Complex64 {
    if x.abs() <= 0.5 {
        // h(x) = sum_{k >= 0} (ix)^k / (k + 2)!; 15 terms reach 1e-18 at
        // |x| = 0.5
        let ix = Complex64::new(0.0, x);
        let mut term = Complex64::new(0.5, 0.0);
        let mut sum = term;
        for k in 1..=14 {
            term = term * ix / (k as f64 + 2.0);
            sum += term;
        }
        sum
    } else {
        let eix = Complex64::from_polar(1.0, x);
        (Complex64::new(1.0, x) - eix) / (x * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadrature_ramp(x: f64) -> Complex64 {
        // Simpson's rule on h(x) = int_0^1 (1 - v) e^{ixv} dv
        let n = 2000;
        let h = 1.0 / n as f64;
        let f = |v: f64| Complex64::from_polar(1.0 - v, x * v);
        let mut sum = f(0.0) + f(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * f(i as f64 * h);
        }
        sum * h / 3.0
    }

    #[test]
    fn ramp_integral_matches_quadrature_on_both_branches() {
        for &x in &[0.0, 1e-9, 0.03, 0.499, 0.501, 2.0, -3.7, 40.0] {
            let want = quadrature_ramp(x);
            let got = ramp_integral(x);
            assert!(
                (got - want).norm() < 1e-10,
                "x = {x}: got {got}, quadrature {want}"
            );
        }
        assert!((ramp_integral(0.0) - Complex64::new(0.5, 0.0)).norm() < 1e-16);
    }

    #[test]
    fn dc_estimate_converges_to_the_drift_current() {
        let process = ScatteringProcess::new(0.5, 11, 100_000).unwrap();
        let drive = DriveSpec::dc(vec![1.0]).unwrap();
        let constants = PhysicalConstants::default();
        let out = simulate_classical(&process, 2.0, 0.7, 1.3, &drive, &constants).unwrap();
        let want = 0.7 / (1.3 * 0.5);
        assert!((out.analytic[0] - Complex64::new(want, 0.0)).norm() < 1e-14);
        let err = (out.current[0] - out.analytic[0]).norm();
        assert!(
            err <= 3.0 * out.stderr[0],
            "deviation {err:.3e} exceeds 3 sigma = {:.3e}",
            3.0 * out.stderr[0]
        );
        assert!(out.stderr[0] < 0.02 * want, "stderr too large: {}", out.stderr[0]);
        assert_eq!(out.n_events, 100_000);
    }

    #[test]
    fn ac_estimate_converges_when_omega_is_twice_gamma() {
        let (gamma, omega) = (1.0, 2.0);
        let process = ScatteringProcess::new(gamma, 17, 100_000).unwrap();
        let drive = DriveSpec::ac(vec![0.8, -0.3], omega).unwrap();
        let constants = PhysicalConstants::default();
        let out = simulate_classical(&process, 1.0, 1.1, 0.9, &drive, &constants).unwrap();
        for l in 0..2 {
            let want = 1.1 * drive.amplitude()[l] / (0.9 * Complex64::new(gamma, -omega));
            assert!((out.analytic[l] - want).norm() < 1e-14);
            let err = (out.current[l] - want).norm();
            assert!(
                err <= 3.0 * out.stderr[l],
                "component {l}: deviation {err:.3e} exceeds {:.3e}",
                3.0 * out.stderr[l]
            );
        }
    }

    #[test]
    fn estimates_track_the_drift_current_across_a_rate_frequency_grid() {
        let constants = PhysicalConstants::default();
        for (i, &gamma) in [0.5, 1.0, 2.0].iter().enumerate() {
            for (j, &omega) in [0.0, 1.0, 4.0].iter().enumerate() {
                let seed = 1100 + (3 * i + j) as u64;
                let process = ScatteringProcess::new(gamma, seed, 30_000).unwrap();
                let drive = DriveSpec::ac(vec![1.0], omega).unwrap();
                let out =
                    simulate_classical(&process, 4.0, 0.6, 1.0, &drive, &constants).unwrap();
                let err = (out.current[0] - out.analytic[0]).norm();
                assert!(
                    err <= 3.0 * out.stderr[0],
                    "gamma = {gamma}, omega = {omega}: {err:.3e} > {:.3e}",
                    3.0 * out.stderr[0]
                );
            }
        }
    }

    #[test]
    fn strong_damping_suppresses_the_response() {
        let process = ScatteringProcess::new(50.0, 23, 50_000).unwrap();
        let drive = DriveSpec::ac(vec![1.0], 1.0).unwrap();
        let constants = PhysicalConstants::default();
        let out = simulate_classical(&process, 1.0, 1.0, 1.0, &drive, &constants).unwrap();
        // |J| -> e^2 N |E| / (m Gamma) up to the tiny omega correction
        assert!(out.current[0].norm() <= 1.05 / 50.0);
        assert!((out.current[0] - out.analytic[0]).norm() <= 3.0 * out.stderr[0]);
    }

    #[test]
    fn result_is_independent_of_temperature_and_reproducible() {
        let process = ScatteringProcess::new(1.0, 5, 2_000).unwrap();
        let drive = DriveSpec::ac(vec![1.0], 0.7).unwrap();
        let constants = PhysicalConstants::default();
        let a = simulate_classical(&process, 0.5, 0.4, 1.0, &drive, &constants).unwrap();
        let b = simulate_classical(&process, 50.0, 0.4, 1.0, &drive, &constants).unwrap();
        assert_eq!(a.current, b.current);
        let c = simulate_classical(&process, 0.5, 0.4, 1.0, &drive, &constants).unwrap();
        assert_eq!(a.current, c.current);
        assert_eq!(a.stderr, c.stderr);
    }

    #[test]
    fn parameter_validation() {
        let process = ScatteringProcess::new(1.0, 1, 100).unwrap();
        let drive = DriveSpec::dc(vec![1.0]).unwrap();
        let constants = PhysicalConstants::default();
        assert!(simulate_classical(&process, -1.0, 1.0, 1.0, &drive, &constants).is_err());
        assert!(simulate_classical(&process, 1.0, 0.0, 1.0, &drive, &constants).is_err());
        assert!(simulate_classical(&process, 1.0, 1.0, -2.0, &drive, &constants).is_err());
        // T = 0 sentinel is fine: the drift response is distribution-free
        assert!(
            simulate_classical(&process, f64::INFINITY, 1.0, 1.0, &drive, &constants).is_ok()
        );
    }
}
