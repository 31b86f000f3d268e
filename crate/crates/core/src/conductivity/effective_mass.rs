//! The inverse effective-mass tensor in its three equivalent forms: the
//! velocity-matrix-element average, the band-derivative average, and the
//! occupation-weighted band curvature obtained by integration by parts.

use super::bloch::BzGrid;
use crate::constants::PhysicalConstants;
use crate::eigen;
use crate::error::{KuboError, Result};
use crate::fermi::{fermi_derivative, fermi_dirac, OccupationSpec};
use crate::model::BlochModel;
use ndarray::Array2;
use ndarray_linalg::Inverse;

/// Which of the three equivalent expressions to evaluate. All agree for
/// simple bands on fine enough grids; the forms differ in what they need
/// from the spectrum (matrix elements, band derivatives, band curvature).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassForm {
    /// -(1 / (hbar^2 N)) sum_{k,n} Phi'(E_n) V^l_nn V^m_nn, no simplicity
    /// requirement.
    MatrixElement,
    /// Same sum read as band derivatives dE_n/dk_l via Hellmann-Feynman;
    /// requires simple bands so the band derivative is well defined.
    BandVelocity,
    /// +(1 / (hbar^2 N)) sum_{k,n} Phi(E_n) d^2 E_n / dk_l dk_m, curvature
    /// from fourth-order central differences on the grid; requires simple
    /// bands so sort-order band tracking is smooth.
    BandCurvature,
}

/// Inverse effective-mass tensor (units 1/mass); symmetric by construction.
#[derive(Debug, Clone)]
pub struct EffectiveMassTensor {
    pub inv_m: Array2<f64>,
    pub form: MassForm,
}

/// Occupation-averaged inverse effective mass over the Brillouin-zone grid.
/// The degeneracy tolerance for the simplicity check is the default
/// spectral-radius policy (1e-8 * max(1, radius)).
pub fn effective_mass(
    model: &BlochModel,
    occ: &OccupationSpec,
    grid: &BzGrid,
    form: MassForm,
    constants: &PhysicalConstants,
) -> Result<EffectiveMassTensor> {
    match *grid {
        BzGrid::Fixed(l) => evaluate_fixed(model, occ, l, form, constants),
        BzGrid::Refine { start, rtol, max_refinements } => {
            if !(rtol.is_finite() && rtol > 0.0) {
                return Err(KuboError::InvalidInput(format!(
                    "refinement tolerance must be positive, got {rtol}"
                )));
            }
            let mut l = start;
            let mut prev = evaluate_fixed(model, occ, l, form, constants)?;
            for _ in 0..max_refinements {
                l *= 2;
                let cur = evaluate_fixed(model, occ, l, form, constants)?;
                let dev = (&prev.inv_m - &cur.inv_m)
                    .iter()
                    .map(|x| x.abs())
                    .fold(0.0, f64::max);
                let scale = cur.inv_m.iter().map(|x| x.abs()).fold(0.0, f64::max);
                if dev <= rtol * scale {
                    return Ok(cur);
                }
                prev = cur;
            }
            Err(KuboError::NoConvergence(format!(
                "effective-mass grid doubling did not reach rtol {rtol:.1e} \
                 within {max_refinements} refinements (final L = {l})"
            )))
        }
    }
}

/// Fourth-order central first-derivative stencil (offsets -2..=2, step h):
/// coefficients / (12 h).
const D1: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
/// Fourth-order central second-derivative stencil: coefficients / (12 h^2).
const D2: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];

fn evaluate_fixed(
    model: &BlochModel,
    occ: &OccupationSpec,
    l_size: usize,
    form: MassForm,
    constants: &PhysicalConstants,
) -> Result<EffectiveMassTensor> {
    if l_size < 2 || l_size % 2 != 0 {
        return Err(KuboError::InvalidResolution(format!(
            "grid size must be even and at least 2, got {l_size}"
        )));
    }
    let d = model.lattice.dim;
    let nb = model.n_bands;
    let n_k = l_size.pow(d as u32);
    let hbar = constants.hbar;

    // grid enumeration is row-major over the fractional multi-index so the
    // curvature stencils can wrap neighbors axis by axis
    let mut energies = vec![vec![0.0f64; nb]; n_k];
    let mut velocities = vec![vec![vec![0.0f64; nb]; d]; n_k];
    let mut iv = vec![0usize; d];
    let half = (l_size / 2) as f64;
    for (flat, (e_slot, v_slot)) in energies.iter_mut().zip(&mut velocities).enumerate() {
        decode(flat, l_size, d, &mut iv);
        let u: Vec<f64> = iv.iter().map(|&i| (i as f64 - half) / l_size as f64).collect();
        let k: Vec<f64> =
            (0..d).map(|r| (0..d).map(|c| model.lattice.b[(r, c)] * u[c]).sum()).collect();
        let eig = eigen::decompose(&model.h(&k))?;
        e_slot.copy_from_slice(&eig.energies);
        for l in 0..d {
            let v = super::trace::rotate_to_eigenbasis(&model.dh(&k, l), &eig.vectors);
            for n in 0..nb {
                v_slot[l][n] = v[(n, n)].re;
            }
        }
    }

    let all: Vec<f64> = energies.iter().flatten().copied().collect();
    let volume = model.cell_volume() * (l_size as f64).powi(d as i32);
    let mu = occ.resolve_mu(&all, volume)?;
    let beta = occ.beta();
    let radius = all.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let eps = 1e-8 * radius.max(1.0);

    if matches!(form, MassForm::BandVelocity | MassForm::BandCurvature) {
        let mut min_gap = f64::INFINITY;
        for e in &energies {
            for w in e.windows(2) {
                min_gap = min_gap.min(w[1] - w[0]);
            }
        }
        if min_gap <= 10.0 * eps {
            return Err(KuboError::SimplicityViolated { min_gap, eps_deg: eps });
        }
    }

    let mut occupation_sum = 0.0f64;
    for e in &all {
        occupation_sum += fermi_dirac(*e, beta, mu);
    }
    let denom = hbar * hbar * occupation_sum;

    let mut num = Array2::<f64>::zeros((d, d));
    match form {
        MassForm::MatrixElement | MassForm::BandVelocity => {
            for (e_k, v_k) in energies.iter().zip(&velocities) {
                for n in 0..nb {
                    let w = fermi_derivative(e_k[n], beta, mu)?;
                    for l in 0..d {
                        for m in l..d {
                            num[(l, m)] -= w * v_k[l][n] * v_k[m][n];
                        }
                    }
                }
            }
        }
        MassForm::BandCurvature => {
            // accumulate the Hessian in fractional coordinates, then map
            // once through k = B u at the end (the transform is linear)
            let h = 1.0 / l_size as f64;
            let mut iv2 = vec![0usize; d];
            for flat in 0..n_k {
                decode(flat, l_size, d, &mut iv2);
                for n in 0..nb {
                    let w = fermi_dirac(energies[flat][n], beta, mu);
                    for l in 0..d {
                        for m in l..d {
                            let hess_u = if l == m {
                                let mut s = 0.0;
                                for (i, c) in D2.iter().enumerate() {
                                    let off = i as isize - 2;
                                    s += c * band_at(&energies, &iv2, l, off, m, 0, l_size, n);
                                }
                                s / (12.0 * h * h)
                            } else {
                                let mut s = 0.0;
                                for (i, ci) in D1.iter().enumerate() {
                                    if *ci == 0.0 {
                                        continue;
                                    }
                                    for (j, cj) in D1.iter().enumerate() {
                                        if *cj == 0.0 {
                                            continue;
                                        }
                                        let (oi, oj) = (i as isize - 2, j as isize - 2);
                                        s += ci
                                            * cj
                                            * band_at(&energies, &iv2, l, oi, m, oj, l_size, n);
                                    }
                                }
                                s / (144.0 * h * h)
                            };
                            num[(l, m)] += w * hess_u;
                        }
                    }
                }
            }
            mirror(&mut num);
            let b_inv = model.lattice.b.inv().map_err(|e| {
                KuboError::SingularLattice(format!("reciprocal basis not invertible: {e}"))
            })?;
            num = b_inv.t().dot(&num).dot(&b_inv);
        }
    }
    mirror(&mut num);

    Ok(EffectiveMassTensor { inv_m: num.mapv(|x| x / denom), form })
}

fn decode(flat: usize, l_size: usize, d: usize, iv: &mut [usize]) {
    let mut rest = flat;
    for i in (0..d).rev() {
        iv[i] = rest % l_size;
        rest /= l_size;
    }
}

/// E_n at the grid point displaced by `off_a` steps along axis `a` and
/// `off_b` along axis `b`, with periodic wrapping.
#[allow(clippy::too_many_arguments)]
fn band_at(
    energies: &[Vec<f64>],
    iv: &[usize],
    a: usize,
    off_a: isize,
    b: usize,
    off_b: isize,
    l_size: usize,
    n: usize,
) -> f64 {
    let d = iv.len();
    let mut flat = 0usize;
    for i in 0..d {
        let mut x = iv[i] as isize;
        if i == a {
            x += off_a;
        }
        if i == b {
            x += off_b;
        }
        let wrapped = x.rem_euclid(l_size as isize) as usize;
        flat = flat * l_size + wrapped;
    }
    energies[flat][n]
}

fn mirror(m: &mut Array2<f64>) {
    let d = m.nrows();
    for l in 0..d {
        for mm in (l + 1)..d {
            m[(mm, l)] = m[(l, mm)];
        }
    }
}
