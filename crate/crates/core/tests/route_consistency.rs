//! End-to-end agreement between independent evaluation routes, exercised
//! the way a consumer would: a model loaded from disk fed to both spectral
//! routes, and the stochastic simulators checked against the formulas.

use kubo::model::{load_tight_binding, ring};
use kubo::{
    conductivity_bloch, conductivity_trace, simulate_classical, simulate_quantum_dc, BzGrid,
    DissipationSpec, DriveSpec, FrequencyGrid, OccupationSpec, PhysicalConstants,
    ScatteringProcess,
};
use num_complex::Complex64;
use std::io::Write;

/// Two inequivalent orbitals, staggered on-site energies, and a complex
/// intercell hop: no time-reversal, no inversion, nonzero orbital offsets.
/// Everything the two routes could disagree on is switched on at once.
const SKEWED_LADDER: &str = r#"{
    "dim": 1,
    "lattice_A": [[1.0]],
    "orbitals": [
        {"label": "A", "tau": [0.0]},
        {"label": "B", "tau": [0.37]}
    ],
    "hoppings": [
        {"R": [0], "from": 0, "to": 0, "value": [0.3, 0.0]},
        {"R": [0], "from": 1, "to": 1, "value": [-0.3, 0.0]},
        {"R": [0], "from": 0, "to": 1, "value": [0.9, 0.2]},
        {"R": [0], "from": 1, "to": 0, "value": [0.9, -0.2]},
        {"R": [1], "from": 1, "to": 0, "value": [0.5, -0.1]},
        {"R": [-1], "from": 0, "to": 1, "value": [0.5, 0.1]}
    ]
}"#;

#[test]
fn file_loaded_model_agrees_between_torus_and_band_route() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(SKEWED_LADDER.as_bytes()).unwrap();
    let loaded = load_tight_binding(f.path()).unwrap();

    let l = 24;
    let occ = OccupationSpec::with_mu(3.0, 0.2).unwrap();
    let gamma = DissipationSpec::new(0.4).unwrap();
    let omegas = FrequencyGrid::new(vec![-1.5, -0.4, 0.0, 0.9, 2.3]).unwrap();

    let torus = conductivity_trace(
        &loaded.tight_binding.finite_model(l).unwrap(),
        &occ,
        &gamma,
        &omegas,
        &loaded.constants,
    )
    .unwrap();
    let band = conductivity_bloch(
        &loaded.tight_binding.bloch_model().unwrap(),
        &occ,
        &gamma,
        &omegas,
        &BzGrid::Fixed(l),
        &loaded.constants,
    )
    .unwrap();

    let scale: f64 = (0..omegas.len()).map(|i| band.max_abs(i)).fold(0.0, f64::max);
    for i in 0..omegas.len() {
        let dev = (torus.entry(i, 0, 0) - band.entry(i, 0, 0)).norm();
        assert!(
            dev <= 1e-10 * scale,
            "routes disagree at omega = {}: torus {} vs band {}",
            omegas.omegas()[i],
            torus.entry(i, 0, 0),
            band.entry(i, 0, 0)
        );
    }
}

/// Loop closure for the quantum pillar: a dc drive on the ring, simulated
/// as piecewise evolution with Poisson resets, lands on sigma(0) * E within
/// sampling error. Field and sample count are chosen so the quadratic
/// response and the torus-gradient correction both sit far below the noise.
#[test]
fn simulated_dc_current_matches_the_linear_response_formula() {
    let constants = PhysicalConstants::default();
    let model = ring(1.0).finite_model(12).unwrap();
    let occ = OccupationSpec::with_mu(2.0, 0.0).unwrap();
    let field = 1e-3;

    let process = ScatteringProcess::new(0.5, 7, 1500).unwrap();
    let drive = DriveSpec::dc(vec![field]).unwrap();
    let est = simulate_quantum_dc(&model, &occ, &process, &drive, &constants).unwrap();

    let sigma = conductivity_trace(
        &model,
        &occ,
        &DissipationSpec::new(0.5).unwrap(),
        &FrequencyGrid::single(0.0).unwrap(),
        &constants,
    )
    .unwrap();
    let predicted = sigma.entry(0, 0, 0).re * field;

    let tol = (3.0 * est.stderr[0]).max(2e-5);
    assert!(
        (est.current[0] - predicted).abs() <= tol,
        "simulated {:.6e} vs formula {predicted:.6e}, stderr {:.2e}",
        est.current[0],
        est.stderr[0]
    );
    assert!(est.stderr[0] > 0.0 && est.n_events == 1500);
}

/// Loop closure for the classical pillar: the waiting-time average over a
/// harmonically driven drift lands on the analytic pole, and the estimate
/// reports that pole alongside itself.
#[test]
fn simulated_classical_current_matches_the_analytic_pole() {
    let constants = PhysicalConstants::default();
    let (g, omega, density, mass) = (0.8, 1.5, 0.9, 1.4);
    let process = ScatteringProcess::new(g, 77, 30_000).unwrap();
    let drive = DriveSpec::ac(vec![0.6], omega).unwrap();

    let est = simulate_classical(&process, 3.0, density, mass, &drive, &constants).unwrap();

    let pole = density / mass * 0.6 / Complex64::new(g, -omega);
    assert!((est.analytic[0] - pole).norm() < 1e-15 * pole.norm());
    assert!(
        (est.current[0] - pole).norm() <= 3.0 * est.stderr[0],
        "estimate {} vs pole {pole}, stderr {:.2e}",
        est.current[0],
        est.stderr[0]
    );
}
