//! Model files: a JSON description of a tight-binding model (lattice,
//! orbitals, hoppings, optional unit constants).

use super::tight_binding::{Hopping, TightBinding};
use crate::constants::PhysicalConstants;
use crate::error::{KuboError, Result};
use crate::lattice::reciprocal_of;
use ndarray::Array2;
use num_complex::Complex64;
use serde::Deserialize;
use std::path::Path;

/// An orbital as declared in the file. The intracell position `tau`
/// (Cartesian, same units as lattice_A) enters hop phases and torus
/// displacements, so the current operator sees where the atoms sit.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Orbital {
    pub label: String,
    pub tau: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HoppingSpec {
    #[serde(rename = "R")]
    r: Vec<i64>,
    from: usize,
    to: usize,
    value: [f64; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantsSpec {
    hbar: Option<f64>,
    e_charge: Option<f64>,
    mass: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    dim: usize,
    #[serde(rename = "lattice_A")]
    lattice_a: Vec<Vec<f64>>,
    orbitals: Vec<Orbital>,
    hoppings: Vec<HoppingSpec>,
    constants: Option<ConstantsSpec>,
}

/// A parsed model file: the tight-binding data plus the declared orbitals
/// and unit constants.
#[derive(Debug)]
pub struct LoadedModel {
    pub tight_binding: TightBinding,
    pub orbitals: Vec<Orbital>,
    pub constants: PhysicalConstants,
}

/// Reads and validates a model file. Syntax errors report line and column;
/// semantic errors name the offending field. Hermiticity requires every
/// hopping's conjugate partner to be listed explicitly.
pub fn load_tight_binding(path: &Path) -> Result<LoadedModel> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| {
        KuboError::ParseError(format!(
            "{}: line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;

    let d = file.dim;
    if d == 0 {
        return Err(KuboError::ParseError("dim: must be at least 1".into()));
    }
    if file.lattice_a.len() != d || file.lattice_a.iter().any(|row| row.len() != d) {
        return Err(KuboError::ParseError(format!("lattice_A: expected a {d} x {d} matrix")));
    }
    let mut a = Array2::<f64>::zeros((d, d));
    for (i, row) in file.lattice_a.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            a[(i, j)] = v;
        }
    }
    let lattice = reciprocal_of(&a)?;

    if file.orbitals.is_empty() {
        return Err(KuboError::ParseError("orbitals: at least one orbital required".into()));
    }
    for (i, orb) in file.orbitals.iter().enumerate() {
        if orb.tau.len() != d {
            return Err(KuboError::ParseError(format!(
                "orbitals[{i}].tau: expected {d} components, got {}",
                orb.tau.len()
            )));
        }
        if orb.tau.iter().any(|v| !v.is_finite()) {
            return Err(KuboError::ParseError(format!("orbitals[{i}].tau: not finite")));
        }
    }

    let n = file.orbitals.len();
    let mut hops = Vec::with_capacity(file.hoppings.len());
    for (i, hs) in file.hoppings.iter().enumerate() {
        if hs.r.len() != d {
            return Err(KuboError::ParseError(format!(
                "hoppings[{i}].R: expected {d} components, got {}",
                hs.r.len()
            )));
        }
        if hs.from >= n || hs.to >= n {
            return Err(KuboError::ParseError(format!(
                "hoppings[{i}]: orbital index out of range (model has {n} orbitals)"
            )));
        }
        if !hs.value[0].is_finite() || !hs.value[1].is_finite() {
            return Err(KuboError::ParseError(format!("hoppings[{i}].value: not finite")));
        }
        hops.push(Hopping {
            offset: hs.r.clone(),
            from: hs.from,
            to: hs.to,
            amplitude: Complex64::new(hs.value[0], hs.value[1]),
        });
    }

    let constants = match &file.constants {
        None => PhysicalConstants::default(),
        Some(c) => PhysicalConstants::new(
            c.hbar.unwrap_or(1.0),
            c.e_charge.unwrap_or(1.0),
            c.mass.unwrap_or(1.0),
        )?,
    };

    let taus: Vec<Vec<f64>> = file.orbitals.iter().map(|o| o.tau.clone()).collect();
    let tight_binding = TightBinding::with_orbital_positions(lattice, taus, hops)?;
    Ok(LoadedModel { tight_binding, orbitals: file.orbitals, constants })
}
