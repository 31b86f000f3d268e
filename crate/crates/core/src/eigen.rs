//! Dense Hermitian eigendecomposition used by every evaluation route.

use crate::error::{KuboError, Result};
use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;

/// Eigenpairs of a Hermitian matrix: `energies` ascending, `vectors` unitary
/// with column j the eigenvector of `energies[j]`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub energies: Vec<f64>,
    pub vectors: Array2<Complex64>,
}

impl EigenDecomposition {
    /// max |E_i| over the spectrum; 0 for the zero matrix.
    pub fn spectral_radius(&self) -> f64 {
        self.energies.iter().map(|e| e.abs()).fold(0.0, f64::max)
    }

    /// Smallest nonzero gap between consecutive (sorted) energies, or None
    /// when the spectrum is a single point.
    pub fn min_nonzero_spacing(&self) -> Option<f64> {
        self.energies
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|g| *g > 0.0)
            .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.min(g))))
    }
}

/// Diagonalizes a Hermitian matrix. Exactly diagonal matrices (all
/// off-diagonal entries zero, as produced by Fourier-basis models) skip
/// LAPACK: the eigenvectors are a permutation sorting the diagonal, which
/// keeps large diagonal models cheap.
pub fn decompose(h: &Array2<Complex64>) -> Result<EigenDecomposition> {
    let n = check_square(h)?;
    if n == 0 {
        return Err(KuboError::InvalidInput("empty matrix".into()));
    }
    let diagonal = h.indexed_iter().all(|((i, j), v)| i == j || (v.re == 0.0 && v.im == 0.0));
    if diagonal {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            h[(i, i)].re.partial_cmp(&h[(j, j)].re).expect("finite energies")
        });
        let energies: Vec<f64> = order.iter().map(|&i| h[(i, i)].re).collect();
        let mut vectors = Array2::<Complex64>::zeros((n, n));
        for (col, &orig) in order.iter().enumerate() {
            vectors[(orig, col)] = Complex64::new(1.0, 0.0);
        }
        return Ok(EigenDecomposition { energies, vectors });
    }
    // The complex eigh here hands the row-major buffer to column-major
    // LAPACK unchanged, so it actually diagonalizes H^T. Feeding it
    // conj(H) = H^T (H is Hermitian) in a fresh standard-layout array makes
    // the returned columns eigenvectors of H itself; the residual checks in
    // the tests below pin this orientation.
    let mut m = Array2::<Complex64>::zeros(h.raw_dim());
    m.zip_mut_with(h, |dst, &src| *dst = src.conj());
    let (energies, vectors) = m.eigh(UPLO::Lower)?;
    Ok(EigenDecomposition { energies: energies.to_vec(), vectors })
}

/// Returns the side length, rejecting non-square or non-finite input.
pub fn check_square(h: &Array2<Complex64>) -> Result<usize> {
    let (r, c) = h.dim();
    if r != c {
        return Err(KuboError::InvalidInput(format!("matrix must be square, got {r}x{c}")));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(KuboError::InvalidInput("matrix has non-finite entries".into()));
    }
    Ok(r)
}

/// Max-norm Hermiticity defect ||H - H^dag||_max.
pub fn hermiticity_defect(h: &Array2<Complex64>) -> f64 {
    let n = h.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (h[(i, j)] - h[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}
