//! Resolving a model name (builtin or file path) and a requested method
//! into a concrete evaluation route, with least-surprise `auto` defaults.

use std::path::Path;

use crate::{CliError, MethodArg};
use kubo::model::{
    build_free_gas, build_planewave_bloch, load_tight_binding, ring, FiniteModel, TightBinding,
};
use kubo::{
    graphene_bloch, graphene_tight_binding, GrapheneParams, Method, PhysicalConstants,
};

pub enum Route {
    Torus(FiniteModel),
    Band(kubo::model::BlochModel),
    Closed(GrapheneParams),
}

pub struct Selection {
    pub route: Route,
    pub constants: PhysicalConstants,
    pub method: Method,
}

enum Named {
    Free,
    Chain,
    Planewave,
    Graphene,
    File(TightBinding, PhysicalConstants),
}

fn resolve_name(name: &str) -> Result<Named, CliError> {
    match name {
        "free" => Ok(Named::Free),
        "chain" => Ok(Named::Chain),
        "planewave" => Ok(Named::Planewave),
        "graphene" => Ok(Named::Graphene),
        other => {
            if Path::new(other).is_file() {
                let loaded = load_tight_binding(Path::new(other))?;
                Ok(Named::File(loaded.tight_binding, loaded.constants))
            } else {
                Err(CliError::Usage(format!(
                    "--model: {other:?} is neither a builtin (free, chain, planewave, \
                     graphene) nor an existing model file"
                )))
            }
        }
    }
}

fn unsupported(name: &str, method: MethodArg, supported: &str) -> CliError {
    CliError::Usage(format!(
        "--method: {method:?} does not apply to model {name:?}; supported: {supported}"
    ))
}

/// The 1-orbital unit chain; doubles as the unit 1-d lattice source for the
/// plane-wave family.
fn chain() -> TightBinding {
    ring(1.0)
}

fn graphene_params() -> Result<GrapheneParams, CliError> {
    Ok(GrapheneParams::new(1.0, 1.0)?)
}

fn planewave(cutoff: f64, constants: &PhysicalConstants) -> Result<kubo::model::BlochModel, CliError> {
    let lattice = chain().bloch_model()?.lattice;
    Ok(build_planewave_bloch(&lattice, &[], cutoff, constants)?)
}

fn free_gas_cutoff(cutoff: f64) -> Result<usize, CliError> {
    if cutoff.fract() != 0.0 || !(1.0..=1e9).contains(&cutoff) {
        return Err(CliError::Usage(format!(
            "--cutoff: the free gas needs a positive integer mode count, got {cutoff}"
        )));
    }
    Ok(cutoff as usize)
}

pub fn conductivity_route(
    name: &str,
    method: MethodArg,
    l: usize,
    cutoff: f64,
    dim: usize,
) -> Result<Selection, CliError> {
    let constants = PhysicalConstants::default();
    let named = resolve_name(name)?;
    let (route, method) = match (named, method) {
        (Named::Free, MethodArg::Trace | MethodArg::Auto) => {
            let model = build_free_gas(l as f64, dim, free_gas_cutoff(cutoff)?, &constants)?;
            (Route::Torus(model), Method::Trace)
        }
        (Named::Free, m) => return Err(unsupported(name, m, "trace, auto")),

        (Named::Chain, MethodArg::Trace) => {
            (Route::Torus(chain().finite_model(l)?), Method::Trace)
        }
        (Named::Chain, MethodArg::Bloch | MethodArg::Auto) => {
            (Route::Band(chain().bloch_model()?), Method::Bloch)
        }
        (Named::Chain, m) => return Err(unsupported(name, m, "trace, bloch, auto")),

        (Named::Planewave, MethodArg::Bloch | MethodArg::Auto) => {
            (Route::Band(planewave(cutoff, &constants)?), Method::Bloch)
        }
        (Named::Planewave, m) => return Err(unsupported(name, m, "bloch, auto")),

        (Named::Graphene, MethodArg::ClosedForm | MethodArg::Auto) => {
            (Route::Closed(graphene_params()?), Method::GrapheneClosedForm)
        }
        (Named::Graphene, MethodArg::Bloch) => {
            (Route::Band(graphene_bloch(&graphene_params()?)?), Method::Bloch)
        }
        (Named::Graphene, MethodArg::Trace) => {
            let model = graphene_tight_binding(&graphene_params()?)?.finite_model(l)?;
            (Route::Torus(model), Method::Trace)
        }

        (Named::File(tb, file_constants), m) => {
            let sel = match m {
                MethodArg::Trace | MethodArg::Auto => {
                    (Route::Torus(tb.finite_model(l)?), Method::Trace)
                }
                MethodArg::Bloch => (Route::Band(tb.bloch_model()?), Method::Bloch),
                MethodArg::ClosedForm => {
                    return Err(unsupported(name, m, "trace, bloch, auto"))
                }
            };
            return Ok(Selection { route: sel.0, constants: file_constants, method: sel.1 });
        }
    };
    Ok(Selection { route, constants, method })
}

/// Band family for the effective-mass command.
pub fn band_model(
    name: &str,
    cutoff: f64,
) -> Result<(kubo::model::BlochModel, PhysicalConstants), CliError> {
    let constants = PhysicalConstants::default();
    match resolve_name(name)? {
        Named::Chain => Ok((chain().bloch_model()?, constants)),
        Named::Planewave => Ok((planewave(cutoff, &constants)?, constants)),
        Named::Graphene => Ok((graphene_bloch(&graphene_params()?)?, constants)),
        Named::File(tb, file_constants) => Ok((tb.bloch_model()?, file_constants)),
        Named::Free => Err(CliError::Usage(
            "--model: the free gas carries no band family; use planewave for the \
             free continuum band"
                .into(),
        )),
    }
}

/// Finite torus model for the quantum simulator.
pub fn finite_model(
    name: &str,
    l: usize,
) -> Result<(FiniteModel, PhysicalConstants), CliError> {
    let constants = PhysicalConstants::default();
    match resolve_name(name)? {
        Named::Chain => Ok((chain().finite_model(l)?, constants)),
        Named::Graphene => Ok((graphene_tight_binding(&graphene_params()?)?.finite_model(l)?, constants)),
        Named::File(tb, file_constants) => Ok((tb.finite_model(l)?, file_constants)),
        Named::Free | Named::Planewave => Err(CliError::Usage(
            "--model: the driven dynamics needs a lattice model with hop displacements \
             (chain, graphene, or a model file)"
                .into(),
        )),
    }
}
