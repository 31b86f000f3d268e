//! Linear-response conductivity of non-interacting electron models.
//!
//! The crate computes the frequency-resolved conductivity tensor of a
//! single-particle Hamiltonian under relaxation-type dissipation, by three
//! independent routes that must agree wherever their domains overlap:
//!
//! - a trace route on finite Hilbert spaces, valid for any Hermitian H with
//!   position or displacement data ([`conductivity::conductivity_trace`]);
//! - a band route for periodic models, summing over a commensurate k-grid
//!   with optional refinement to the quadrature limit
//!   ([`conductivity::conductivity_bloch`]);
//! - closed-form expressions for the nearest-neighbor honeycomb model
//!   ([`graphene`]).
//!
//! A fourth pillar simulates the underlying dissipative dynamics directly
//! (piecewise-deterministic evolution interrupted by Poisson resets) and
//! estimates the same conductivities from time-averaged currents
//! ([`dynamics`]), closing the loop between formula and process.

pub mod conductivity;
pub mod constants;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod fermi;
pub mod graphene;
pub mod grid;
pub mod lattice;
pub mod model;
pub mod result;

pub use conductivity::{
    conductivity_bloch, conductivity_trace, drude_part, effective_mass, regular_part, BzGrid,
    DissipationSpec, EffectiveMassTensor, MassForm,
};
pub use dynamics::{
    draw_intervals, simulate_classical, simulate_quantum_ac, simulate_quantum_dc,
    AcCurrentEstimate, ClassicalCurrentEstimate, DcCurrentEstimate, DriveSpec, ScatteringProcess,
};
pub use graphene::{
    conductivity_graphene_closed_form, graphene_bloch, graphene_tight_binding,
    GrapheneConductivity, GrapheneParams,
};
pub use constants::PhysicalConstants;
pub use error::{KuboError, Result};
pub use fermi::OccupationSpec;
pub use grid::FrequencyGrid;
pub use lattice::Lattice;
pub use result::{ConductivityResult, Method, ResultMetadata};
