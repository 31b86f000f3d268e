//! Bravais lattice geometry and the discretized Brillouin zone.

use crate::error::{KuboError, Result};
use ndarray::Array2;
use ndarray_linalg::{Determinant, Inverse};

/// A d-dimensional Bravais lattice. Columns of `a` are the lattice vectors,
/// columns of `b` the reciprocal vectors; b = 2*pi*a^{-T} by construction,
/// so a^T b = 2*pi*I holds to machine precision.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub dim: usize,
    pub a: Array2<f64>,
    pub b: Array2<f64>,
}

const COND_LIMIT: f64 = 1e12;

/// Builds the lattice with reciprocal matrix B = 2*pi*A^{-T}.
pub fn reciprocal_of(a: &Array2<f64>) -> Result<Lattice> {
    let (rows, cols) = a.dim();
    if rows != cols || rows == 0 {
        return Err(KuboError::InvalidInput(format!(
            "lattice matrix must be square and nonempty, got {rows}x{cols}"
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(KuboError::InvalidInput("lattice matrix has non-finite entries".into()));
    }
    let det = a.det().map_err(|e| KuboError::SingularLattice(e.to_string()))?;
    if det.abs() < f64::MIN_POSITIVE {
        return Err(KuboError::SingularLattice(format!("|det A| = {:.3e}", det.abs())));
    }
    let a_inv = a.inv().map_err(|e| KuboError::SingularLattice(e.to_string()))?;
    let cond = norm_1(a) * norm_1(&a_inv);
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(KuboError::SingularLattice(format!("condition number {cond:.3e}")));
    }
    let b = a_inv.t().mapv(|v| 2.0 * std::f64::consts::PI * v);
    Ok(Lattice { dim: rows, a: a.clone(), b })
}

impl Lattice {
    /// Unit-cell volume |det A|.
    pub fn cell_volume(&self) -> f64 {
        self.a.det().expect("square matrix").abs()
    }

    /// Reciprocal-cell volume |det B| = (2*pi)^d / |det A|.
    pub fn reciprocal_volume(&self) -> f64 {
        self.b.det().expect("square matrix").abs()
    }
}

fn norm_1(m: &Array2<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// The discretized Brillouin zone: exactly L^d points {B*n/L} with integer
/// index n in {-L/2, ..., L/2 - 1}^d, ordered lexicographically in n.
/// The ordering is fixed so downstream reductions are bit-reproducible.
pub fn k_grid(lattice: &Lattice, l: usize) -> Result<Vec<Vec<f64>>> {
    if l < 2 || l % 2 != 0 {
        return Err(KuboError::InvalidResolution(format!(
            "grid size must be even and >= 2, got {l}"
        )));
    }
    let d = lattice.dim;
    let half = (l / 2) as i64;
    let total = (l as usize).pow(d as u32);
    let mut points = Vec::with_capacity(total);
    let mut n = vec![-half; d];
    loop {
        let mut k = vec![0.0; d];
        for (row, kr) in k.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (col, ni) in n.iter().enumerate() {
                acc += lattice.b[(row, col)] * (*ni as f64) / (l as f64);
            }
            *kr = acc;
        }
        points.push(k);
        // odometer increment, last component fastest (lexicographic order)
        let mut axis = d;
        loop {
            if axis == 0 {
                return Ok(points);
            }
            axis -= 1;
            n[axis] += 1;
            if n[axis] < half {
                break;
            }
            n[axis] = -half;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use proptest::prelude::*;

    fn identity_lattice(d: usize) -> Lattice {
        reciprocal_of(&Array2::eye(d)).unwrap()
    }

    #[test]
    fn identity_reciprocal_is_two_pi() {
        let lat = identity_lattice(2);
        let expect = 2.0 * std::f64::consts::PI;
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { expect } else { 0.0 };
                assert!((lat.b[(i, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn diagonal_lattice() {
        let lat = reciprocal_of(&arr2(&[[2.0, 0.0], [0.0, 3.0]])).unwrap();
        assert!((lat.b[(0, 0)] - std::f64::consts::PI).abs() < 1e-14);
        assert!((lat.b[(1, 1)] - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-14);
        assert!(lat.b[(0, 1)].abs() < 1e-14 && lat.b[(1, 0)].abs() < 1e-14);
        assert!((lat.cell_volume() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn hexagonal_duality() {
        // a1 = (a/2)(1, sqrt3), a2 = (a/2)(-1, sqrt3) with a = 1
        let s3 = 3.0_f64.sqrt();
        let a = arr2(&[[0.5, -0.5], [0.5 * s3, 0.5 * s3]]);
        let lat = reciprocal_of(&a).unwrap();
        // b_i . a_j = 2 pi delta_ij
        let dot = lat.a.t().dot(&lat.b);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 2.0 * std::f64::consts::PI } else { 0.0 };
                assert!((dot[(i, j)] - want).abs() < 1e-12, "a^T b mismatch at ({i},{j})");
            }
        }
    }

    #[test]
    fn singular_rejected() {
        let res = reciprocal_of(&arr2(&[[1.0, 2.0], [2.0, 4.0]]));
        assert!(matches!(res, Err(KuboError::SingularLattice(_))));
    }

    #[test]
    fn grid_1d_l2() {
        let lat = identity_lattice(1);
        let pts = k_grid(&lat, 2).unwrap();
        assert_eq!(pts.len(), 2);
        assert!((pts[0][0] + std::f64::consts::PI).abs() < 1e-14);
        assert!(pts[1][0].abs() < 1e-14);
    }

    #[test]
    fn grid_2d_count_and_membership() {
        let lat = identity_lattice(2);
        let l = 4;
        let pts = k_grid(&lat, l).unwrap();
        assert_eq!(pts.len(), 16);
        // every point must be B*n/L for integer n in the index box
        let binv = lat.b.inv().unwrap();
        for k in &pts {
            for (i, row) in binv.rows().into_iter().enumerate() {
                let n = l as f64 * (row[0] * k[0] + row[1] * k[1]);
                assert!((n - n.round()).abs() < 1e-9, "component {i} not integral: {n}");
                let n = n.round() as i64;
                assert!((-(l as i64) / 2..l as i64 / 2).contains(&n));
            }
        }
    }

    #[test]
    fn grid_negation_closure_mod_reciprocal() {
        // -n folded into {-L/2,...,L/2-1} stays in the index box, so the grid
        // is invariant under k -> -k modulo reciprocal lattice vectors.
        let l: i64 = 6;
        for n in -l / 2..l / 2 {
            let m = (-n).rem_euclid(l);
            let folded = if m >= l / 2 { m - l } else { m };
            assert!((-l / 2..l / 2).contains(&folded));
        }
    }

    #[test]
    fn odd_or_tiny_grid_rejected() {
        let lat = identity_lattice(1);
        assert!(matches!(k_grid(&lat, 3), Err(KuboError::InvalidResolution(_))));
        assert!(matches!(k_grid(&lat, 0), Err(KuboError::InvalidResolution(_))));
    }

    proptest! {
        #[test]
        fn duality_holds_for_random_lattices(
            a00 in 0.5f64..2.0, a01 in -0.9f64..0.9,
            a10 in -0.9f64..0.9, a11 in 0.5f64..2.0,
        ) {
            let a = arr2(&[[a00, a01], [a10, a11]]);
            prop_assume!((a00 * a11 - a01 * a10).abs() > 0.05);
            let lat = reciprocal_of(&a).unwrap();
            let dot = lat.a.t().dot(&lat.b);
            for i in 0..2 {
                for j in 0..2 {
                    let want = if i == j { 2.0 * std::f64::consts::PI } else { 0.0 };
                    prop_assert!((dot[(i, j)] - want).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn grid_size_is_l_pow_d(l in (1usize..7).prop_map(|v| 2 * v)) {
            let lat = identity_lattice(2);
            prop_assert_eq!(k_grid(&lat, l).unwrap().len(), l * l);
        }
    }
}
