//! Tight-binding models on Bravais lattices: a list of hopping amplitudes
//! between orbitals at integer cell offsets, realizable either as a Bloch
//! family H(k) or as a finite torus Hamiltonian with minimal-image
//! displacements.

use super::{BlochModel, DerivativeData, FiniteModel};
use crate::error::{KuboError, Result};
use crate::lattice::{reciprocal_of, Lattice};
use ndarray::Array2;
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::Arc;

/// One matrix element <cell n, from| H |cell n + offset, to> = amplitude,
/// the same for every n. Hermiticity requires the partner with negated
/// offset, swapped orbitals and conjugated amplitude to be present too.
#[derive(Clone, Debug)]
pub struct Hopping {
    pub offset: Vec<i64>,
    pub from: usize,
    pub to: usize,
    pub amplitude: Complex64,
}

#[derive(Clone, Debug)]
pub struct TightBinding {
    pub lattice: Lattice,
    pub n_orbitals: usize,
    hops: Vec<Hopping>,
    /// Cartesian position of each orbital within the cell. Hop phases and
    /// torus displacements carry tau_to - tau_from, so the velocity operator
    /// sees the true atomic geometry; all-zero positions recover the plain
    /// cell-offset (periodic-gauge) convention.
    taus: Vec<Vec<f64>>,
}

impl TightBinding {
    /// Validates shapes and Hermiticity (after aggregating duplicate keys,
    /// every hopping must have its conjugate partner). All orbitals sit at
    /// the cell origin; see [`TightBinding::with_orbital_positions`] for
    /// models where intra-cell geometry matters.
    pub fn new(lattice: Lattice, n_orbitals: usize, hops: Vec<Hopping>) -> Result<Self> {
        let d = lattice.dim;
        Self::with_orbital_positions(lattice, vec![vec![0.0; d]; n_orbitals], hops)
    }

    /// Like [`TightBinding::new`], with one Cartesian position per orbital.
    /// Point-group symmetries of the response tensor hold on symmetric
    /// k-grids only when these positions are supplied, because the velocity
    /// phases must know where the atoms actually sit.
    pub fn with_orbital_positions(
        lattice: Lattice,
        taus: Vec<Vec<f64>>,
        hops: Vec<Hopping>,
    ) -> Result<Self> {
        let n_orbitals = taus.len();
        if n_orbitals == 0 {
            return Err(KuboError::EmptyBasis);
        }
        for tau in &taus {
            if tau.len() != lattice.dim {
                return Err(KuboError::InvalidInput(format!(
                    "orbital position {tau:?} has wrong dimension, expected {}",
                    lattice.dim
                )));
            }
            if tau.iter().any(|x| !x.is_finite()) {
                return Err(KuboError::InvalidInput("orbital position not finite".into()));
            }
        }
        let d = lattice.dim;
        let mut agg: HashMap<(Vec<i64>, usize, usize), Complex64> = HashMap::new();
        for h in &hops {
            if h.offset.len() != d {
                return Err(KuboError::InvalidInput(format!(
                    "hopping offset {:?} has wrong dimension, expected {d}",
                    h.offset
                )));
            }
            if h.from >= n_orbitals || h.to >= n_orbitals {
                return Err(KuboError::InvalidInput(format!(
                    "hopping orbital indices ({}, {}) out of range for {n_orbitals} orbitals",
                    h.from, h.to
                )));
            }
            if !h.amplitude.re.is_finite() || !h.amplitude.im.is_finite() {
                return Err(KuboError::InvalidInput("hopping amplitude not finite".into()));
            }
            *agg.entry((h.offset.clone(), h.from, h.to)).or_default() += h.amplitude;
        }
        for ((offset, from, to), amp) in &agg {
            let partner_key = (offset.iter().map(|x| -x).collect::<Vec<_>>(), *to, *from);
            let partner = agg.get(&partner_key).copied().unwrap_or_default();
            let defect = (partner - amp.conj()).norm();
            if defect > 1e-12 * amp.norm().max(1.0) {
                return Err(KuboError::NonHermitianInput(format!(
                    "hopping ({offset:?}, {from} -> {to}) lacks a conjugate partner \
                     (defect {defect:.3e})"
                )));
            }
        }
        // canonical order keeps downstream closures reproducible
        let mut flat: Vec<Hopping> = agg
            .into_iter()
            .filter(|(_, amp)| amp.norm() > 0.0)
            .map(|((offset, from, to), amplitude)| Hopping { offset, from, to, amplitude })
            .collect();
        flat.sort_by(|x, y| {
            (&x.offset, x.from, x.to).cmp(&(&y.offset, y.from, y.to))
        });
        Ok(Self { lattice, n_orbitals, hops: flat, taus })
    }

    pub fn hops(&self) -> &[Hopping] {
        &self.hops
    }

    pub fn orbital_positions(&self) -> &[Vec<f64>] {
        &self.taus
    }

    /// The Bloch family H(k)[from, to] = sum over hops of amplitude *
    /// exp(i k . (A offset + tau_to - tau_from)). The analytic k-derivative
    /// carries the same displacement, matching the torus convention exactly.
    pub fn bloch_model(&self) -> Result<BlochModel> {
        let n = self.n_orbitals;
        let d = self.lattice.dim;
        let terms: Arc<Vec<(Vec<f64>, usize, usize, Complex64)>> = Arc::new(
            self.hops
                .iter()
                .map(|h| {
                    let r: Vec<f64> = (0..d)
                        .map(|row| {
                            (0..d)
                                .map(|col| self.lattice.a[(row, col)] * h.offset[col] as f64)
                                .sum::<f64>()
                                + self.taus[h.to][row]
                                - self.taus[h.from][row]
                        })
                        .collect();
                    (r, h.from, h.to, h.amplitude)
                })
                .collect(),
        );
        let t1 = Arc::clone(&terms);
        let h_of_k = Arc::new(move |k: &[f64]| {
            let mut h = Array2::<Complex64>::zeros((n, n));
            for (r, from, to, amp) in t1.iter() {
                let phase: f64 = k.iter().zip(r).map(|(ki, ri)| ki * ri).sum();
                h[(*from, *to)] += amp * Complex64::new(phase.cos(), phase.sin());
            }
            h
        });
        let t2 = Arc::clone(&terms);
        let dh_dk = Arc::new(move |k: &[f64], l: usize| {
            let mut dh = Array2::<Complex64>::zeros((n, n));
            for (r, from, to, amp) in t2.iter() {
                let phase: f64 = k.iter().zip(r).map(|(ki, ri)| ki * ri).sum();
                dh[(*from, *to)] +=
                    amp * Complex64::new(0.0, r[l]) * Complex64::new(phase.cos(), phase.sin());
            }
            dh
        });
        BlochModel::new(self.lattice.clone(), n, h_of_k, dh_dk)
    }

    /// The model on an L^d torus: states (cell, orbital), cell index
    /// lexicographic with the last axis fastest. Displacements come from the
    /// minimal image of the cell difference plus the orbital-position
    /// difference; a cell difference of exactly L/2 splits equally between
    /// the +-L/2 images, leaving that component's cell part zero. Requires
    /// L >= twice the hopping range so the wrapped model matches the Bloch
    /// family on the commensurate k-grid.
    pub fn finite_model(&self, l: usize) -> Result<FiniteModel> {
        let d = self.lattice.dim;
        if l < 2 || l % 2 != 0 {
            return Err(KuboError::InvalidResolution(format!(
                "torus size must be even and at least 2, got {l}"
            )));
        }
        let range = self
            .hops
            .iter()
            .flat_map(|h| h.offset.iter().map(|x| x.unsigned_abs() as usize))
            .max()
            .unwrap_or(0);
        if l < 2 * range {
            return Err(KuboError::InvalidResolution(format!(
                "torus size {l} below twice the hopping range {range}; wrapped hoppings \
                 would alias"
            )));
        }
        let n_cells = (l as usize).pow(d as u32);
        let dim = n_cells * self.n_orbitals;
        let li = l as i64;

        let decode = |rank: usize| -> Vec<i64> {
            let mut n = vec![0i64; d];
            let mut r = rank;
            for ax in (0..d).rev() {
                n[ax] = (r % l) as i64;
                r /= l;
            }
            n
        };
        let encode = |n: &[i64]| -> usize {
            n.iter().fold(0usize, |acc, &c| acc * l + c.rem_euclid(li) as usize)
        };

        let mut h = Array2::<Complex64>::zeros((dim, dim));
        for ca in 0..n_cells {
            let na = decode(ca);
            for hop in &self.hops {
                let nb: Vec<i64> = na.iter().zip(&hop.offset).map(|(a, o)| a + o).collect();
                let cb = encode(&nb);
                h[(ca * self.n_orbitals + hop.from, cb * self.n_orbitals + hop.to)] +=
                    hop.amplitude;
            }
        }

        // minimal image of one integer component; ties at L/2 average to 0
        let fold = |s: i64| -> f64 {
            let r = s.rem_euclid(li);
            if 2 * r == li {
                0.0
            } else if 2 * r > li {
                (r - li) as f64
            } else {
                r as f64
            }
        };
        let mut disps = vec![Array2::<f64>::zeros((dim, dim)); d];
        for ca in 0..n_cells {
            let na = decode(ca);
            for cb in 0..n_cells {
                let nbv = decode(cb);
                let w: Vec<f64> = (0..d).map(|ax| fold(nbv[ax] - na[ax])).collect();
                for ax in 0..d {
                    let cart: f64 = (0..d).map(|col| self.lattice.a[(ax, col)] * w[col]).sum();
                    for alpha in 0..self.n_orbitals {
                        for beta in 0..self.n_orbitals {
                            disps[ax][(
                                ca * self.n_orbitals + alpha,
                                cb * self.n_orbitals + beta,
                            )] = cart + self.taus[beta][ax] - self.taus[alpha][ax];
                        }
                    }
                }
            }
        }

        let volume = self.lattice.cell_volume() * (l as f64).powi(d as i32);
        FiniteModel::new(h, DerivativeData::Displacements(disps), volume, d, true)
    }
}

/// One-dimensional chain from hopping blocks: `hoppings` maps a cell offset
/// R to the N x N block <cell 0| H |cell R>. Returns the L-cell torus model
/// and the matching Bloch family (unit lattice constant).
pub fn build_chain(
    n_cells: usize,
    hoppings: &[(i64, Array2<Complex64>)],
    n_orbitals: usize,
) -> Result<(FiniteModel, BlochModel)> {
    let lattice = reciprocal_of(&ndarray::arr2(&[[1.0]]))?;
    let mut hops = Vec::new();
    for (r, block) in hoppings {
        if block.dim() != (n_orbitals, n_orbitals) {
            return Err(KuboError::InvalidInput(format!(
                "hopping block at offset {r} has shape {:?}, expected ({n_orbitals}, \
                 {n_orbitals})",
                block.dim()
            )));
        }
        for ((from, to), &amp) in block.indexed_iter() {
            if amp.norm() > 0.0 {
                hops.push(Hopping { offset: vec![*r], from, to, amplitude: amp });
            }
        }
    }
    let tb = TightBinding::new(lattice, n_orbitals, hops)?;
    Ok((tb.finite_model(n_cells)?, tb.bloch_model()?))
}

/// Single-orbital ring with real nearest-neighbor hopping t: band 2t cos(ka).
pub fn ring(t: f64) -> TightBinding {
    let lattice = reciprocal_of(&ndarray::arr2(&[[1.0]])).expect("unit lattice");
    TightBinding::new(
        lattice,
        1,
        vec![
            Hopping { offset: vec![1], from: 0, to: 0, amplitude: Complex64::new(t, 0.0) },
            Hopping { offset: vec![-1], from: 0, to: 0, amplitude: Complex64::new(t, 0.0) },
        ],
    )
    .expect("ring is Hermitian")
}

/// Ring threaded by a flux: hopping t e^{i phi}, band 2t cos(ka + phi).
/// Breaks k -> -k symmetry, so equilibrium carries a current and the
/// response has even as well as odd terms in the field.
pub fn flux_ring(t: f64, phi: f64) -> TightBinding {
    let lattice = reciprocal_of(&ndarray::arr2(&[[1.0]])).expect("unit lattice");
    let amp = Complex64::from_polar(t, phi);
    TightBinding::new(
        lattice,
        1,
        vec![
            Hopping { offset: vec![1], from: 0, to: 0, amplitude: amp },
            Hopping { offset: vec![-1], from: 0, to: 0, amplitude: amp.conj() },
        ],
    )
    .expect("flux ring is Hermitian")
}

/// Two-orbital chain with intra-cell hopping t1 and inter-cell hopping t2:
/// H(k) = [[0, t1 + t2 e^{-ika}], [c.c., 0]], bands +-|t1 + t2 e^{-ika}|.
pub fn dimer_chain(t1: f64, t2: f64) -> TightBinding {
    let lattice = reciprocal_of(&ndarray::arr2(&[[1.0]])).expect("unit lattice");
    TightBinding::new(
        lattice,
        2,
        vec![
            Hopping { offset: vec![0], from: 0, to: 1, amplitude: Complex64::new(t1, 0.0) },
            Hopping { offset: vec![0], from: 1, to: 0, amplitude: Complex64::new(t1, 0.0) },
            Hopping { offset: vec![-1], from: 0, to: 1, amplitude: Complex64::new(t2, 0.0) },
            Hopping { offset: vec![1], from: 1, to: 0, amplitude: Complex64::new(t2, 0.0) },
        ],
    )
    .expect("dimer chain is Hermitian")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::decompose;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn ring_bloch_band_is_cosine() {
        let bm = ring(1.0).bloch_model().unwrap();
        for &k in &[-2.0, -0.3, 0.0, 0.7, 3.0] {
            let h = bm.h(&[k]);
            assert_abs_diff_eq!(h[(0, 0)].re, 2.0 * k.cos(), epsilon = 1e-14);
            assert_abs_diff_eq!(h[(0, 0)].im, 0.0, epsilon = 1e-14);
            let dh = bm.dh(&[k], 0);
            assert_abs_diff_eq!(dh[(0, 0)].re, -2.0 * k.sin(), epsilon = 1e-14);
        }
    }

    #[test]
    fn dimer_bands_match_closed_form() {
        let bm = dimer_chain(1.0, 0.4).bloch_model().unwrap();
        for &k in &[0.0, 0.5, 1.9, PI] {
            let eig = decompose(&bm.h(&[k])).unwrap();
            let gap = (Complex64::new(1.0, 0.0)
                + 0.4 * Complex64::new(0.0, -k).exp())
            .norm();
            assert_abs_diff_eq!(eig.energies[0], -gap, epsilon = 1e-13);
            assert_abs_diff_eq!(eig.energies[1], gap, epsilon = 1e-13);
        }
    }

    #[test]
    fn torus_spectrum_matches_band_samples() {
        let l = 8;
        let fm = ring(1.0).finite_model(l).unwrap();
        let eig = decompose(&fm.h).unwrap();
        let mut band: Vec<f64> =
            (0..l).map(|n| 2.0 * (2.0 * PI * n as f64 / l as f64).cos()).collect();
        band.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (got, want) in eig.energies.iter().zip(&band) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn missing_conjugate_partner_is_rejected() {
        let lattice = reciprocal_of(&ndarray::arr2(&[[1.0]])).unwrap();
        let res = TightBinding::new(
            lattice,
            1,
            vec![Hopping { offset: vec![1], from: 0, to: 0, amplitude: Complex64::new(1.0, 0.0) }],
        );
        assert!(matches!(res, Err(KuboError::NonHermitianInput(_))));
    }

    #[test]
    fn torus_wrap_displacement_signs() {
        let l = 8;
        let fm = ring(1.0).finite_model(l).unwrap();
        let DerivativeData::Displacements(ds) = &fm.derivative else {
            panic!("torus model must carry displacement matrices")
        };
        assert_eq!(ds[0][(0, 1)], 1.0);
        assert_eq!(ds[0][(1, 0)], -1.0);
        // hop across the seam wraps to the minimal image
        assert_eq!(ds[0][(0, 7)], -1.0);
        assert_eq!(ds[0][(7, 0)], 1.0);
        // antipodal pair sits exactly at L/2: tie resolves to zero
        assert_eq!(ds[0][(0, 4)], 0.0);
    }

    #[test]
    fn antipodal_tie_matches_vanishing_band_velocity() {
        // On an L = 2 ring both hopping images reach the same cell; the tie
        // rule zeroes the displacement, consistent with the band velocity
        // -2t sin(k) vanishing at both commensurate k in {-pi, 0}.
        let fm = ring(1.0).finite_model(2).unwrap();
        assert_abs_diff_eq!(fm.h[(0, 1)].re, 2.0, epsilon = 1e-15);
        let dh = fm.partial_h(0);
        assert_eq!(dh.iter().map(|z| z.norm()).fold(0.0, f64::max), 0.0);
    }

    #[test]
    fn orbital_positions_enter_phases_and_displacements() {
        let lattice = reciprocal_of(&ndarray::arr2(&[[1.0]])).unwrap();
        let t = Complex64::new(0.7, 0.0);
        let tb = TightBinding::with_orbital_positions(
            lattice,
            vec![vec![0.0], vec![0.3]],
            vec![
                Hopping { offset: vec![0], from: 0, to: 1, amplitude: t },
                Hopping { offset: vec![0], from: 1, to: 0, amplitude: t },
            ],
        )
        .unwrap();
        let bm = tb.bloch_model().unwrap();
        for &k in &[-1.1, 0.6] {
            let h01 = bm.h(&[k])[(0, 1)];
            let want = t * Complex64::from_polar(1.0, 0.3 * k);
            assert!((h01 - want).norm() < 1e-15);
            let d01 = bm.dh(&[k], 0)[(0, 1)];
            assert!((d01 - want * Complex64::new(0.0, 0.3)).norm() < 1e-15);
        }
        let fm = tb.finite_model(4).unwrap();
        let DerivativeData::Displacements(ds) = &fm.derivative else {
            panic!("torus model must carry displacement matrices")
        };
        assert_eq!(ds[0][(0, 1)], 0.3);
        assert_eq!(ds[0][(1, 0)], -0.3);
    }

    #[test]
    fn undersized_torus_is_rejected() {
        let lattice = reciprocal_of(&ndarray::arr2(&[[1.0]])).unwrap();
        let tb = TightBinding::new(
            lattice,
            1,
            vec![
                Hopping { offset: vec![3], from: 0, to: 0, amplitude: Complex64::new(1.0, 0.0) },
                Hopping { offset: vec![-3], from: 0, to: 0, amplitude: Complex64::new(1.0, 0.0) },
            ],
        )
        .unwrap();
        assert!(matches!(tb.finite_model(4), Err(KuboError::InvalidResolution(_))));
        assert!(tb.finite_model(6).is_ok());
    }

    #[test]
    fn build_chain_spectrum_example() {
        let t = Complex64::new(1.0, 0.0);
        let (fm, bm) = build_chain(
            8,
            &[(1, ndarray::arr2(&[[t]])), (-1, ndarray::arr2(&[[t]]))],
            1,
        )
        .unwrap();
        assert_eq!(fm.dim, 8);
        assert_eq!(bm.n_bands, 1);
        let eig = decompose(&fm.h).unwrap();
        let mut band: Vec<f64> =
            (0..8).map(|n| 2.0 * (2.0 * PI * n as f64 / 8.0).cos()).collect();
        band.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (got, want) in eig.energies.iter().zip(&band) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
    }
}
