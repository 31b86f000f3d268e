//! Free electron gas on a d-dimensional box with periodic boundaries,
//! represented in the momentum eigenbasis.

use super::{DerivativeData, FiniteModel};
use crate::constants::PhysicalConstants;
use crate::error::{KuboError, Result};
use ndarray::Array2;
use num_complex::Complex64;

/// Momentum-diagonal model: one state per wavevector k = 2 pi j / L with
/// integer index |j_i| <= cutoff, energy hbar^2 |k|^2 / (2m). The current
/// derivative d_l H = diag(hbar^2 k_l / m) is stored explicitly because the
/// Hamiltonian is diagonal and the displacement convention would see no
/// off-diagonal structure to differentiate.
pub fn build_free_gas(
    box_l: f64,
    d: usize,
    cutoff: usize,
    constants: &PhysicalConstants,
) -> Result<FiniteModel> {
    if !(box_l.is_finite() && box_l > 0.0) {
        return Err(KuboError::InvalidInput(format!("box length must be positive, got {box_l}")));
    }
    if d == 0 {
        return Err(KuboError::InvalidInput("spatial dimension must be at least 1".into()));
    }
    if cutoff == 0 {
        return Err(KuboError::EmptyBasis);
    }
    let per_axis = 2 * cutoff + 1;
    let dim = per_axis.pow(d as u32);
    let c = cutoff as i64;
    let dk = 2.0 * std::f64::consts::PI / box_l;

    let mut h = Array2::<Complex64>::zeros((dim, dim));
    let mut dh = vec![Array2::<Complex64>::zeros((dim, dim)); d];
    let mut idx = vec![-c; d];
    for row in 0..dim {
        let k: Vec<f64> = idx.iter().map(|&j| dk * j as f64).collect();
        let e = constants.hbar * constants.hbar * k.iter().map(|x| x * x).sum::<f64>()
            / (2.0 * constants.mass);
        h[(row, row)] = Complex64::new(e, 0.0);
        for l in 0..d {
            dh[l][(row, row)] =
                Complex64::new(constants.hbar * constants.hbar * k[l] / constants.mass, 0.0);
        }
        // odometer over the index box, last axis fastest
        for ax in (0..d).rev() {
            idx[ax] += 1;
            if idx[ax] <= c {
                break;
            }
            idx[ax] = -c;
        }
    }
    FiniteModel::new(h, DerivativeData::Explicit(dh), box_l.powi(d as i32), d, true)
}
