//! Error type shared by every module of the crate.

use thiserror::Error;

/// Unified error enum; variants map 1:1 onto the failure modes of the
/// public operations.
#[derive(Debug, Error)]
pub enum KuboError {
    #[error("lattice matrix is singular or ill-conditioned: {0}")]
    SingularLattice(String),

    #[error("invalid grid resolution: {0}")]
    InvalidResolution(String),

    #[error("operation requires finite temperature (beta = +inf sentinel given)")]
    ZeroTemperatureUnsupported,

    #[error("target density {target} outside attainable range ({min}, {max})")]
    DensityOutOfRange { target: f64, min: f64, max: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("input is not Hermitian: {0}")]
    NonHermitianInput(String),

    #[error("model file parse error: {0}")]
    ParseError(String),

    #[error("plane-wave basis is empty for the given cutoff")]
    EmptyBasis,

    #[error("dissipation rate must be strictly positive, got {0}")]
    NonPositiveGamma(f64),

    #[error("model dimension {dim} exceeds the dense-evolution limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("integrator step too coarse: energy drift {drift:.3e} exceeds {limit:.3e} at E=0")]
    StepSizeTooCoarse { drift: f64, limit: f64 },

    #[error("bands are not simple on the grid: min gap {min_gap:.3e} <= 10*eps_deg {eps_deg:.3e}")]
    SimplicityViolated { min_gap: f64, eps_deg: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("linear algebra backend error: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, KuboError>;
