//! Brillouin-zone conductivity for periodic models: the band sum on the
//! finite uniform k-grid, its Drude (intraband / degenerate) and regular
//! (interband) parts, and the quadrature limit via grid doubling.

use super::{DissipationSpec, PairWeights};
use crate::constants::PhysicalConstants;
use crate::eigen::{self, EigenDecomposition};
use crate::error::{KuboError, Result};
use crate::fermi::{ChemSpec, OccupationSpec};
use crate::grid::FrequencyGrid;
use crate::lattice::k_grid;
use crate::model::BlochModel;
use crate::result::{ConductivityResult, Method, ResultMetadata};
use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

/// Brillouin-zone discretization: a fixed L x ... x L grid, or successive
/// L-doubling until two consecutive grids agree.
#[derive(Debug, Clone, Copy)]
pub enum BzGrid {
    Fixed(usize),
    Refine { start: usize, rtol: f64, max_refinements: usize },
}

/// Spectrum and velocity matrices at one k-point: energies ascending,
/// eigenvector columns orthonormal, V^l = chi^dagger (dH/dk_l) chi per
/// direction (Hermitian because dH/dk_l is).
pub struct BandData {
    pub energies: Vec<f64>,
    pub vectors: Array2<Complex64>,
    pub velocities: Vec<Array2<Complex64>>,
}

/// Diagonalizes H(k) and rotates the k-derivatives into the band basis.
pub fn band_data(model: &BlochModel, k: &[f64]) -> Result<BandData> {
    let eig = eigen::decompose(&model.h(k))?;
    let velocities = (0..model.lattice.dim)
        .map(|l| super::trace::rotate_to_eigenbasis(&model.dh(k, l), &eig.vectors))
        .collect();
    let EigenDecomposition { energies, vectors } = eig;
    Ok(BandData { energies, vectors, velocities })
}

/// Full conductivity tensor over the frequency grid:
/// sigma_lm(omega) = -(e^2 / (hbar^2 |cell| L^d)) * sum_{k} sum_{n,n'}
///   dPhi_{n'n}(k) * V^l_{nn'}(k) * V^m_{n'n}(k)
///   / (gamma + i((E_n' - E_n)/hbar - omega)).
/// The uniform grid sum is the periodic trapezoid rule, so refinement by
/// L-doubling converges spectrally for finite beta and positive gamma.
pub fn conductivity_bloch(
    model: &BlochModel,
    occ: &OccupationSpec,
    gamma: &DissipationSpec,
    omegas: &FrequencyGrid,
    grid: &BzGrid,
    constants: &PhysicalConstants,
) -> Result<ConductivityResult> {
    evaluate(model, occ, gamma, omegas, grid, constants, Part::Full)
}

/// Intraband part: diagonal pairs plus any pair inside the degeneracy
/// tolerance, all carrying the Fermi-derivative weight and the pure
/// gamma - i omega denominator.
pub fn drude_part(
    model: &BlochModel,
    occ: &OccupationSpec,
    gamma: &DissipationSpec,
    omegas: &FrequencyGrid,
    grid: &BzGrid,
    constants: &PhysicalConstants,
) -> Result<ConductivityResult> {
    evaluate(model, occ, gamma, omegas, grid, constants, Part::Drude)
}

/// Interband complement of [`drude_part`]; the two sum to
/// [`conductivity_bloch`] because every ordered pair is routed to exactly
/// one of them by the same degeneracy predicate.
pub fn regular_part(
    model: &BlochModel,
    occ: &OccupationSpec,
    gamma: &DissipationSpec,
    omegas: &FrequencyGrid,
    grid: &BzGrid,
    constants: &PhysicalConstants,
) -> Result<ConductivityResult> {
    evaluate(model, occ, gamma, omegas, grid, constants, Part::Regular)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    Full,
    Drude,
    Regular,
}

/// k-points per parallel work item. Chunk boundaries depend only on this
/// constant, and each chunk is reduced sequentially in grid order, so the
/// result is bit-identical for every worker count.
const K_CHUNK: usize = 64;

fn evaluate(
    model: &BlochModel,
    occ: &OccupationSpec,
    gamma: &DissipationSpec,
    omegas: &FrequencyGrid,
    grid: &BzGrid,
    constants: &PhysicalConstants,
    part: Part,
) -> Result<ConductivityResult> {
    match *grid {
        BzGrid::Fixed(l) => evaluate_fixed(model, occ, gamma, omegas, l, constants, part),
        BzGrid::Refine { start, rtol, max_refinements } => {
            if !(rtol.is_finite() && rtol > 0.0) {
                return Err(KuboError::InvalidInput(format!(
                    "refinement tolerance must be positive, got {rtol}"
                )));
            }
            let mut l = start;
            let mut prev = evaluate_fixed(model, occ, gamma, omegas, l, constants, part)?;
            for _ in 0..max_refinements {
                l *= 2;
                let cur = evaluate_fixed(model, occ, gamma, omegas, l, constants, part)?;
                let mut dev = 0.0f64;
                let mut scale = 0.0f64;
                for (a, b) in prev.sigma.iter().zip(&cur.sigma) {
                    for (x, y) in a.iter().zip(b.iter()) {
                        dev = dev.max((x - y).norm());
                        scale = scale.max(y.norm());
                    }
                }
                if dev <= rtol * scale {
                    return Ok(cur);
                }
                prev = cur;
            }
            Err(KuboError::NoConvergence(format!(
                "grid doubling did not reach rtol {rtol:.1e} within {max_refinements} \
                 refinements (final L = {l})"
            )))
        }
    }
}

fn evaluate_fixed(
    model: &BlochModel,
    occ: &OccupationSpec,
    gamma: &DissipationSpec,
    omegas: &FrequencyGrid,
    l: usize,
    constants: &PhysicalConstants,
    part: Part,
) -> Result<ConductivityResult> {
    let d = model.lattice.dim;
    let nb = model.n_bands;
    let ks = k_grid(&model.lattice, l)?;
    let volume = model.cell_volume() * (l as f64).powi(d as i32);
    let hbar = constants.hbar;
    let prefactor = -constants.e_charge * constants.e_charge / (hbar * hbar * volume);

    let bands: Vec<BandData> =
        ks.par_iter().map(|k| band_data(model, k)).collect::<Result<_>>()?;

    let all_energies: Vec<f64> =
        bands.iter().flat_map(|b| b.energies.iter().copied()).collect();
    let mu = occ.resolve_mu(&all_energies, volume)?;
    let radius = all_energies.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let eps = gamma.eps_for(radius);
    let pw = PairWeights::new(occ.beta(), mu, eps, hbar, gamma.gamma())?;
    warn_on_near_crossings(&bands, &all_energies);

    let omega_values = omegas.omegas();
    let chunk_sums: Vec<Vec<Array2<Complex64>>> = bands
        .par_chunks(K_CHUNK)
        .map(|chunk| {
            let mut acc = vec![Array2::<Complex64>::zeros((d, d)); omega_values.len()];
            for bd in chunk {
                for n in 0..nb {
                    for np in 0..nb {
                        let (e_n, e_np) = (bd.energies[n], bd.energies[np]);
                        let keep = match part {
                            Part::Full => true,
                            Part::Drude => pw.degenerate(e_n, e_np),
                            Part::Regular => !pw.degenerate(e_n, e_np),
                        };
                        if !keep {
                            continue;
                        }
                        let (dphi, de) = pw.terms(e_n, e_np);
                        for (iw, &w) in omega_values.iter().enumerate() {
                            let weight = pw.weight(dphi, de, w);
                            let acc_w = &mut acc[iw];
                            for ll in 0..d {
                                for mm in 0..d {
                                    acc_w[(ll, mm)] += bd.velocities[ll][(n, np)]
                                        * bd.velocities[mm][(n, np)].conj()
                                        * weight;
                                }
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let mut sigma = vec![Array2::<Complex64>::zeros((d, d)); omega_values.len()];
    for chunk in &chunk_sums {
        for (total, partial) in sigma.iter_mut().zip(chunk) {
            *total += partial;
        }
    }
    for s in &mut sigma {
        s.mapv_inplace(|z| z * prefactor);
    }

    let mut metadata = ResultMetadata {
        grid_l: Some(l),
        band_truncation: Some(nb),
        gamma: Some(gamma.gamma()),
        beta: Some(occ.beta()),
        mu: Some(mu),
        eps_deg: Some(eps),
        ..Default::default()
    };
    if let ChemSpec::Density(target) = occ.chem() {
        metadata.density = Some(target);
    }

    Ok(ConductivityResult {
        dim: d,
        omegas: omega_values.to_vec(),
        sigma,
        method: Method::Bloch,
        metadata,
    })
}

/// Small interband gaps make the regular integrand sharply peaked; finite
/// beta and gamma keep it bounded, but quadrature may need deep refinement,
/// so near-crossings are surfaced rather than silently absorbed.
fn warn_on_near_crossings(bands: &[BandData], all_energies: &[f64]) {
    let mut min_gap = f64::INFINITY;
    for bd in bands {
        for w in bd.energies.windows(2) {
            min_gap = min_gap.min(w[1] - w[0]);
        }
    }
    if !min_gap.is_finite() {
        return; // single band: no interband structure at all
    }
    let lo = all_energies.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all_energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bandwidth = hi - lo;
    if min_gap < 1e-3 * bandwidth {
        log::warn!(
            "minimum interband gap {min_gap:.3e} is below 1e-3 * bandwidth \
             {bandwidth:.3e}; expect slow grid convergence near the crossing"
        );
    }
}
