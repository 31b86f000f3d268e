//! Hamiltonian representations: finite Hilbert-space models carrying the
//! data needed to form the derivation d_l H, and Bloch families k -> H(k).

mod file;
mod free_gas;
mod planewave;
mod tight_binding;

pub use file::{load_tight_binding, LoadedModel, Orbital};
pub use free_gas::build_free_gas;
pub use planewave::build_planewave_bloch;
pub use tight_binding::{build_chain, dimer_chain, flux_ring, ring, Hopping, TightBinding};

use crate::constants::PhysicalConstants;
use crate::eigen::{self, hermiticity_defect};
use crate::error::{KuboError, Result};
use crate::fermi::{fermi_dirac, OccupationSpec};
use crate::lattice::Lattice;
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// How a finite model knows its spatial structure. The derivation
/// d_l = -i[X_l, .] acts entrywise as (d_l M)_{ab} = i * disp_l(a,b) * M_{ab},
/// where disp(a,b) is the displacement from state a to state b.
#[derive(Clone)]
pub enum DerivativeData {
    /// Torus models: one dense displacement matrix per direction,
    /// antisymmetric entry-wise, from the minimal-image convention.
    Displacements(Vec<Array2<f64>>),
    /// Open-boundary models: per-state positions (dim x d); displacements
    /// are position differences.
    Positions(Array2<f64>),
    /// Momentum-basis models (free gas): d_l H given directly. No position
    /// data exists, so field-coupled dynamics are unavailable.
    Explicit(Vec<Array2<Complex64>>),
}

/// A Hamiltonian on a finite Hilbert space together with everything needed
/// to evaluate currents: H, the displacement data, and the volume entering
/// the trace density.
#[derive(Clone)]
pub struct FiniteModel {
    pub dim: usize,
    pub spatial_dim: usize,
    pub h: Array2<Complex64>,
    pub derivative: DerivativeData,
    pub volume: f64,
    pub periodic: bool,
}

const HERMITICITY_TOL: f64 = 1e-12;

impl FiniteModel {
    pub fn new(
        h: Array2<Complex64>,
        derivative: DerivativeData,
        volume: f64,
        spatial_dim: usize,
        periodic: bool,
    ) -> Result<Self> {
        let dim = eigen::check_square(&h)?;
        if !(volume.is_finite() && volume > 0.0) {
            return Err(KuboError::InvalidInput(format!("volume must be positive, got {volume}")));
        }
        let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let defect = hermiticity_defect(&h);
        if defect > HERMITICITY_TOL * scale {
            return Err(KuboError::NonHermitianInput(format!(
                "Hamiltonian defect {defect:.3e} exceeds {HERMITICITY_TOL:.0e} * {scale:.3e}"
            )));
        }
        match &derivative {
            DerivativeData::Displacements(ds) => {
                if ds.len() != spatial_dim {
                    return Err(KuboError::InvalidInput(
                        "one displacement matrix required per direction".into(),
                    ));
                }
                for (l, d) in ds.iter().enumerate() {
                    if d.dim() != (dim, dim) {
                        return Err(KuboError::InvalidInput(format!(
                            "displacement matrix {l} has wrong shape"
                        )));
                    }
                    for a in 0..dim {
                        for b in a..dim {
                            if (d[(a, b)] + d[(b, a)]).abs() > 1e-12 {
                                return Err(KuboError::InvalidInput(format!(
                                    "displacement matrix {l} not antisymmetric at ({a},{b})"
                                )));
                            }
                        }
                    }
                }
            }
            DerivativeData::Positions(x) => {
                if x.dim() != (dim, spatial_dim) {
                    return Err(KuboError::InvalidInput("positions must be dim x d".into()));
                }
            }
            DerivativeData::Explicit(vs) => {
                if vs.len() != spatial_dim {
                    return Err(KuboError::InvalidInput(
                        "one derivative matrix required per direction".into(),
                    ));
                }
                for v in vs {
                    if v.dim() != (dim, dim) {
                        return Err(KuboError::InvalidInput(
                            "derivative matrix has wrong shape".into(),
                        ));
                    }
                }
            }
        }
        Ok(Self { dim, spatial_dim, h, derivative, volume, periodic })
    }

    /// The derived Hamiltonian d_l H. Hermitian whenever H is, because the
    /// displacement factor is antisymmetric.
    pub fn partial_h(&self, l: usize) -> Array2<Complex64> {
        assert!(l < self.spatial_dim, "direction {l} out of range");
        match &self.derivative {
            DerivativeData::Explicit(vs) => vs[l].clone(),
            _ => {
                let mut out = self.h.clone();
                self.scale_by_displacement(&mut out, l);
                out
            }
        }
    }

    /// Applies M_{ab} -> i * disp_l(a,b) * M_{ab} in place (the derivation
    /// acting entrywise). Panics for Explicit derivative data.
    pub fn scale_by_displacement(&self, m: &mut Array2<Complex64>, l: usize) {
        let i = Complex64::new(0.0, 1.0);
        match &self.derivative {
            DerivativeData::Displacements(ds) => {
                let d = &ds[l];
                for ((a, b), v) in m.indexed_iter_mut() {
                    *v *= i * d[(a, b)];
                }
            }
            DerivativeData::Positions(x) => {
                for ((a, b), v) in m.indexed_iter_mut() {
                    *v *= i * (x[(b, l)] - x[(a, l)]);
                }
            }
            DerivativeData::Explicit(_) => {
                panic!("entrywise derivation undefined for explicit derivative data")
            }
        }
    }

    /// True when the derivation can act on arbitrary density matrices, i.e.
    /// displacement or position data is present.
    pub fn supports_field_coupling(&self) -> bool {
        !matches!(self.derivative, DerivativeData::Explicit(_))
    }

    /// The displacement matrix disp_l(a, b) for direction l, or None for
    /// momentum-basis models that carry no position data.
    pub fn displacement(&self, l: usize) -> Option<Array2<f64>> {
        match &self.derivative {
            DerivativeData::Displacements(ds) => Some(ds[l].clone()),
            DerivativeData::Positions(x) => {
                let n = self.dim;
                let mut d = Array2::<f64>::zeros((n, n));
                for a in 0..n {
                    for b in 0..n {
                        d[(a, b)] = x[(b, l)] - x[(a, l)];
                    }
                }
                Some(d)
            }
            DerivativeData::Explicit(_) => None,
        }
    }
}

/// A family k -> H(k) of N x N Hermitian matrices with analytic k-derivative,
/// over the Brillouin zone of `lattice`. Construction validates hermiticity
/// and the derivative against finite differences on fixed sample points;
/// exactly periodic families (tight-binding) are additionally checked for
/// spectrum invariance under k -> k + G. Truncated continuum families skip
/// that check: a finite plane-wave basis is only approximately periodic, and
/// its truncation error is controlled by cutoff doubling instead.
#[derive(Clone)]
pub struct BlochModel {
    pub lattice: Lattice,
    pub n_bands: usize,
    h_of_k: Arc<dyn Fn(&[f64]) -> Array2<Complex64> + Send + Sync>,
    dh_dk: Arc<dyn Fn(&[f64], usize) -> Array2<Complex64> + Send + Sync>,
}

impl BlochModel {
    pub fn new(
        lattice: Lattice,
        n_bands: usize,
        h_of_k: Arc<dyn Fn(&[f64]) -> Array2<Complex64> + Send + Sync>,
        dh_dk: Arc<dyn Fn(&[f64], usize) -> Array2<Complex64> + Send + Sync>,
    ) -> Result<Self> {
        Self::build(lattice, n_bands, h_of_k, dh_dk, true)
    }

    /// Constructor for truncated continuum bases (no exact BZ periodicity).
    pub fn new_truncated(
        lattice: Lattice,
        n_bands: usize,
        h_of_k: Arc<dyn Fn(&[f64]) -> Array2<Complex64> + Send + Sync>,
        dh_dk: Arc<dyn Fn(&[f64], usize) -> Array2<Complex64> + Send + Sync>,
    ) -> Result<Self> {
        Self::build(lattice, n_bands, h_of_k, dh_dk, false)
    }

    fn build(
        lattice: Lattice,
        n_bands: usize,
        h_of_k: Arc<dyn Fn(&[f64]) -> Array2<Complex64> + Send + Sync>,
        dh_dk: Arc<dyn Fn(&[f64], usize) -> Array2<Complex64> + Send + Sync>,
        check_periodicity: bool,
    ) -> Result<Self> {
        if n_bands == 0 {
            return Err(KuboError::EmptyBasis);
        }
        let model = Self { lattice, n_bands, h_of_k, dh_dk };
        model.validate(check_periodicity)?;
        Ok(model)
    }

    pub fn h(&self, k: &[f64]) -> Array2<Complex64> {
        (self.h_of_k)(k)
    }

    pub fn dh(&self, k: &[f64], l: usize) -> Array2<Complex64> {
        (self.dh_dk)(k, l)
    }

    pub fn cell_volume(&self) -> f64 {
        self.lattice.cell_volume()
    }

    /// Sample-point validation: Hermiticity, dh vs central differences, and
    /// (for exactly periodic families) spectrum equality under k -> k + G.
    fn validate(&self, check_periodicity: bool) -> Result<()> {
        let d = self.lattice.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(0x426c6f63);
        let samples: Vec<Vec<f64>> = (0..6)
            .map(|_| {
                let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
                (0..d)
                    .map(|row| (0..d).map(|col| self.lattice.b[(row, col)] * u[col]).sum())
                    .collect()
            })
            .collect();
        for k in &samples {
            let h = self.h(k);
            if h.dim() != (self.n_bands, self.n_bands) {
                return Err(KuboError::InvalidInput("h_of_k has wrong shape".into()));
            }
            let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
            if hermiticity_defect(&h) > 1e-12 * scale {
                return Err(KuboError::NonHermitianInput(format!(
                    "h_of_k not Hermitian at sample k = {k:?}"
                )));
            }
            // derivative vs central finite difference, step scaled to the
            // reciprocal cell
            let step = 1e-6 * self.lattice.b.column(0).iter().map(|v| v.abs()).sum::<f64>();
            for l in 0..d {
                let dh = self.dh(k, l);
                let mut kp = k.clone();
                let mut km = k.clone();
                kp[l] += step;
                km[l] -= step;
                let fd = (self.h(&kp) - self.h(&km)).mapv(|z| z / (2.0 * step));
                let err = (&dh - &fd).iter().map(|z| z.norm()).fold(0.0, f64::max);
                if err > 1e-6 * scale {
                    return Err(KuboError::InvalidInput(format!(
                        "dh_dk mismatch with finite differences: {err:.3e} at k = {k:?}, l = {l}"
                    )));
                }
            }
            if check_periodicity {
                let e0 = sorted_spectrum(&h)?;
                let scale = 1.0f64.max(e0.iter().fold(0.0f64, |a, &v| a.max(v.abs())));
                for g in 0..d {
                    let kg: Vec<f64> =
                        (0..d).map(|row| k[row] + self.lattice.b[(row, g)]).collect();
                    let eg = sorted_spectrum(&self.h(&kg))?;
                    let dev = e0
                        .iter()
                        .zip(&eg)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    if dev > 1e-9 * scale {
                        return Err(KuboError::InvalidInput(format!(
                            "spectrum not periodic under k -> k + b_{g}: deviation {dev:.3e}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn sorted_spectrum(h: &Array2<Complex64>) -> Result<Vec<f64>> {
    Ok(eigen::decompose(h)?.energies)
}

/// Equilibrium current density J_eq = -(e/hbar) * (1/|Omega|) *
/// Tr{(d_l H) Phi(H)} per direction. Real because both factors are
/// Hermitian; vanishes (to rounding) for real Hamiltonians.
pub fn equilibrium_current(
    model: &FiniteModel,
    occ: &OccupationSpec,
    constants: &PhysicalConstants,
) -> Result<Vec<f64>> {
    let eig = eigen::decompose(&model.h)?;
    let mu = occ.resolve_mu(&eig.energies, model.volume)?;
    let beta = occ.beta();
    let pref = -constants.e_charge / (constants.hbar * model.volume);
    let mut out = Vec::with_capacity(model.spatial_dim);
    for l in 0..model.spatial_dim {
        let dl = model.partial_h(l);
        let w = dl.dot(&eig.vectors);
        // Tr{(d_l H) Phi(H)} = sum_a Phi(E_a) <v_a| d_l H |v_a>
        let mut tr = 0.0;
        for (a, &e) in eig.energies.iter().enumerate() {
            let diag: Complex64 =
                eig.vectors.column(a).iter().zip(w.column(a)).map(|(v, w)| v.conj() * w).sum();
            tr += fermi_dirac(e, beta, mu) * diag.re;
        }
        out.push(pref * tr);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::reciprocal_of;
    use ndarray::array;

    #[test]
    fn rejects_non_hermitian() {
        let h = array![
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            [Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.0)],
        ];
        let x = Array2::<f64>::zeros((2, 1));
        let res = FiniteModel::new(h, DerivativeData::Positions(x), 1.0, 1, false);
        assert!(matches!(res, Err(KuboError::NonHermitianInput(_))));
    }

    #[test]
    fn partial_h_is_hermitian_for_positions() {
        let h = array![
            [Complex64::new(0.2, 0.0), Complex64::new(1.0, 0.3)],
            [Complex64::new(1.0, -0.3), Complex64::new(-0.1, 0.0)],
        ];
        let x = array![[0.0], [0.7]];
        let m = FiniteModel::new(h, DerivativeData::Positions(x), 1.0, 1, false).unwrap();
        let dh = m.partial_h(0);
        assert!(hermiticity_defect(&dh) < 1e-14);
        // diagonal vanishes: zero displacement to itself
        assert_eq!(dh[(0, 0)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn bloch_model_validates_derivative() {
        let lat = reciprocal_of(&array![[1.0]]).unwrap();
        // h(k) = 2 cos k, but a wrong derivative (sign flipped)
        let h = Arc::new(|k: &[f64]| {
            array![[Complex64::new(2.0 * k[0].cos(), 0.0)]]
        });
        let bad_dh = Arc::new(|k: &[f64], _l: usize| {
            array![[Complex64::new(2.0 * k[0].sin(), 0.0)]]
        });
        assert!(BlochModel::new(lat.clone(), 1, h.clone(), bad_dh).is_err());
        let good_dh = Arc::new(|k: &[f64], _l: usize| {
            array![[Complex64::new(-2.0 * k[0].sin(), 0.0)]]
        });
        assert!(BlochModel::new(lat, 1, h, good_dh).is_ok());
    }

    #[test]
    fn equilibrium_current_vanishes_for_real_ring() {
        let (fm, _) = build_chain(
            8,
            &[(1, array![[Complex64::new(1.0, 0.0)]]), (-1, array![[Complex64::new(1.0, 0.0)]])],
            1,
        )
        .unwrap();
        let occ = OccupationSpec::with_mu(2.0, 0.3).unwrap();
        let j = equilibrium_current(&fm, &occ, &PhysicalConstants::default()).unwrap();
        assert!(j[0].abs() < 1e-10, "J_eq = {}", j[0]);
    }

    #[test]
    fn equilibrium_current_zero_for_zero_hamiltonian() {
        let h = Array2::<Complex64>::zeros((4, 4));
        let x = Array2::<f64>::zeros((4, 1));
        let m = FiniteModel::new(h, DerivativeData::Positions(x), 2.0, 1, false).unwrap();
        let occ = OccupationSpec::with_mu(1.0, 0.0).unwrap();
        let j = equilibrium_current(&m, &occ, &PhysicalConstants::default()).unwrap();
        assert_eq!(j[0], 0.0);
    }

    #[test]
    fn flux_ring_equilibrium_current_matches_band_velocity_sum() {
        // complex hopping t e^{i phi} gives a current-carrying equilibrium;
        // oracle: J = -(e/(hbar L)) sum_k v(k) Phi(E(k)) with E(k) the band
        // of the flux ring and v its analytic derivative.
        // small L keeps the discretization residue of the odd integrand
        // visible, so the current is appreciably nonzero
        let (t, phi, l) = (1.0, 0.6, 4usize);
        let tb = flux_ring(t, phi);
        let fm = tb.finite_model(l).unwrap();
        let occ = OccupationSpec::with_mu(2.0, 0.2).unwrap();
        let j = equilibrium_current(&fm, &occ, &PhysicalConstants::default()).unwrap();
        let mut oracle = 0.0;
        for jdx in 0..l {
            let k = 2.0 * std::f64::consts::PI * (jdx as f64 - (l / 2) as f64) / l as f64;
            // H(k) = t e^{i phi} e^{ik} + t e^{-i phi} e^{-ik} = 2t cos(k + phi)
            let e = 2.0 * t * (k + phi).cos();
            let v = -2.0 * t * (k + phi).sin();
            oracle += v * fermi_dirac(e, occ.beta(), 0.2);
        }
        oracle *= -1.0 / l as f64;
        assert!((j[0] - oracle).abs() < 1e-12, "J = {}, oracle = {oracle}", j[0]);
        assert!(j[0].abs() > 1e-3, "flux ring should carry current");
    }
}
