//! Plane-wave representation of a periodic continuum Hamiltonian:
//! H(k)_{GG'} = (hbar^2/2m)|k+G|^2 delta_{GG'} + V_{G-G'} on the basis of
//! reciprocal vectors inside a cutoff radius.

use super::BlochModel;
use crate::constants::PhysicalConstants;
use crate::error::{KuboError, Result};
use crate::lattice::Lattice;
use ndarray::Array2;
use ndarray_linalg::Eigh;
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::Arc;

/// Builds the truncated plane-wave family. `v_fourier` lists potential
/// coefficients as (integer reciprocal index, value); a real potential
/// requires V_{-G} = conj(V_G) for every listed G. `cutoff` is the radius
/// |G| <= cutoff in reciprocal length units; the basis is empty below the
/// shortest reciprocal vector only when it also excludes G = 0.
pub fn build_planewave_bloch(
    lattice: &Lattice,
    v_fourier: &[(Vec<i64>, Complex64)],
    cutoff: f64,
    constants: &PhysicalConstants,
) -> Result<BlochModel> {
    if cutoff.is_nan() {
        return Err(KuboError::InvalidInput("cutoff must not be NaN".into()));
    }
    if cutoff < 0.0 {
        return Err(KuboError::EmptyBasis);
    }
    let d = lattice.dim;

    // enumeration bound: |B m| >= sigma_min(B) |m|
    let btb = lattice.b.t().dot(&lattice.b);
    let (evals, _) = btb.eigh(ndarray_linalg::UPLO::Lower)?;
    let sigma_min = evals
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v))
        .max(f64::MIN_POSITIVE)
        .sqrt();
    let m_max = (cutoff / sigma_min).floor() as i64;

    let mut gs: Vec<Vec<i64>> = Vec::new();
    let mut idx = vec![-m_max; d];
    let count = (2 * m_max + 1).pow(d as u32);
    for _ in 0..count {
        let cart: Vec<f64> = (0..d)
            .map(|row| (0..d).map(|col| lattice.b[(row, col)] * idx[col] as f64).sum())
            .collect();
        if cart.iter().map(|x| x * x).sum::<f64>().sqrt() <= cutoff {
            gs.push(idx.clone());
        }
        for ax in (0..d).rev() {
            idx[ax] += 1;
            if idx[ax] <= m_max {
                break;
            }
            idx[ax] = -m_max;
        }
    }
    if gs.is_empty() {
        return Err(KuboError::EmptyBasis);
    }
    gs.sort();
    let n = gs.len();

    let mut vmap: HashMap<Vec<i64>, Complex64> = HashMap::new();
    for (g, v) in v_fourier {
        if g.len() != d {
            return Err(KuboError::InvalidInput(format!(
                "potential index {g:?} has wrong dimension, expected {d}"
            )));
        }
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(KuboError::InvalidInput("potential coefficient not finite".into()));
        }
        *vmap.entry(g.clone()).or_default() += v;
    }
    for (g, v) in &vmap {
        let partner_key: Vec<i64> = g.iter().map(|x| -x).collect();
        let partner = vmap.get(&partner_key).copied().unwrap_or_default();
        if (partner - v.conj()).norm() > 1e-12 * v.norm().max(1.0) {
            return Err(KuboError::NonHermitianInput(format!(
                "potential coefficient at {g:?} lacks its conjugate at -G"
            )));
        }
    }

    // k-independent potential block, symmetrized so rounding in the input
    // cannot leave a Hermiticity defect
    let mut vmat = Array2::<Complex64>::zeros((n, n));
    for (i, gi) in gs.iter().enumerate() {
        for (j, gj) in gs.iter().enumerate() {
            let diff: Vec<i64> = gi.iter().zip(gj).map(|(a, b)| a - b).collect();
            if let Some(&v) = vmap.get(&diff) {
                vmat[(i, j)] = v;
            }
        }
    }
    let vmat = (&vmat + &vmat.t().mapv(|z| z.conj())).mapv(|z| 0.5 * z);

    let g_cart: Arc<Vec<Vec<f64>>> = Arc::new(
        gs.iter()
            .map(|g| {
                (0..d)
                    .map(|row| (0..d).map(|col| lattice.b[(row, col)] * g[col] as f64).sum())
                    .collect()
            })
            .collect(),
    );
    let kin = constants.hbar * constants.hbar / (2.0 * constants.mass);
    let vel = constants.hbar * constants.hbar / constants.mass;

    let g1 = Arc::clone(&g_cart);
    let h_of_k = Arc::new(move |k: &[f64]| {
        let mut h = vmat.clone();
        for (i, g) in g1.iter().enumerate() {
            let sq: f64 = k.iter().zip(g).map(|(ki, gi)| (ki + gi) * (ki + gi)).sum();
            h[(i, i)] += Complex64::new(kin * sq, 0.0);
        }
        h
    });
    let g2 = Arc::clone(&g_cart);
    let dh_dk = Arc::new(move |k: &[f64], l: usize| {
        let mut dh = Array2::<Complex64>::zeros((g2.len(), g2.len()));
        for (i, g) in g2.iter().enumerate() {
            dh[(i, i)] = Complex64::new(vel * (k[l] + g[l]), 0.0);
        }
        dh
    });
    BlochModel::new_truncated(lattice.clone(), n, h_of_k, dh_dk)
}
