//! Conductivity tensors with full provenance metadata.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Which evaluation route produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Trace,
    Bloch,
    GrapheneClosedForm,
    DynamicsQuantum,
    DynamicsClassical,
}

/// Everything needed to reproduce a result: physics parameters, grid sizes,
/// and (for stochastic methods) the seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultMetadata {
    /// Spatial grid / torus size L, when a grid was used.
    pub grid_l: Option<usize>,
    /// Basis-size truncation (Fourier mode count or plane-wave bands).
    pub band_truncation: Option<usize>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub mu: Option<f64>,
    pub density: Option<f64>,
    pub eps_deg: Option<f64>,
    pub seed: Option<u64>,
    pub n_events: Option<usize>,
    pub theta_nodes: Option<usize>,
}

/// A d x d complex conductivity tensor per frequency. `sigma[i]` corresponds
/// to `omegas[i]`; entries are finite whenever the dissipation rate is
/// positive.
#[derive(Debug, Clone)]
pub struct ConductivityResult {
    pub dim: usize,
    pub omegas: Vec<f64>,
    pub sigma: Vec<Array2<Complex64>>,
    pub method: Method,
    pub metadata: ResultMetadata,
}

impl ConductivityResult {
    /// Tensor entry sigma_lm at frequency index `i`.
    pub fn entry(&self, i: usize, l: usize, m: usize) -> Complex64 {
        self.sigma[i][(l, m)]
    }

    /// Largest entry magnitude at frequency index `i`; zero tensors give 0.
    pub fn max_abs(&self, i: usize) -> f64 {
        self.sigma[i].iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Entrywise sum of two results on identical grids (used to verify the
    /// Drude + regular partition).
    pub fn entrywise_sum(&self, other: &ConductivityResult) -> ConductivityResult {
        assert_eq!(self.omegas, other.omegas, "frequency grids must match");
        assert_eq!(self.dim, other.dim);
        let sigma = self
            .sigma
            .iter()
            .zip(&other.sigma)
            .map(|(a, b)| a + b)
            .collect();
        ConductivityResult {
            dim: self.dim,
            omegas: self.omegas.clone(),
            sigma,
            method: self.method,
            metadata: self.metadata.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accessors() {
        let mut m = Array2::<Complex64>::zeros((2, 2));
        m[(0, 1)] = Complex64::new(3.0, -4.0);
        let r = ConductivityResult {
            dim: 2,
            omegas: vec![0.0],
            sigma: vec![m],
            method: Method::Trace,
            metadata: ResultMetadata::default(),
        };
        assert_eq!(r.entry(0, 0, 1), Complex64::new(3.0, -4.0));
        assert!((r.max_abs(0) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn metadata_serializes() {
        let md = ResultMetadata { grid_l: Some(16), gamma: Some(0.5), ..Default::default() };
        let s = serde_json::to_string(&md).unwrap();
        let back: ResultMetadata = serde_json::from_str(&s).unwrap();
        assert_eq!(back, md);
    }
}
