//! Built-in cross-check suites: independent evaluation routes compared on
//! small models, with one printed line and a pinned tolerance per check.

use crate::{CliError, SuiteArg};
use kubo::model::{dimer_chain, ring};
use kubo::{
    conductivity_bloch, conductivity_graphene_closed_form, conductivity_trace, drude_part,
    regular_part, BzGrid, ConductivityResult, DissipationSpec, FrequencyGrid, GrapheneParams,
    OccupationSpec, PhysicalConstants,
};

struct Check {
    name: &'static str,
    deviation: f64,
    tolerance: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

/// Largest entrywise deviation between two results, relative to the largest
/// entry magnitude across both.
fn relative_deviation(a: &ConductivityResult, b: &ConductivityResult) -> f64 {
    let mut dev = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..a.omegas.len() {
        scale = scale.max(a.max_abs(i)).max(b.max_abs(i));
        for l in 0..a.dim {
            for m in 0..a.dim {
                dev = dev.max((a.entry(i, l, m) - b.entry(i, l, m)).norm());
            }
        }
    }
    if scale == 0.0 {
        dev
    } else {
        dev / scale
    }
}

pub fn run_suite(suite: SuiteArg) -> Result<(), CliError> {
    match suite {
        SuiteArg::Oracle => run_oracle(),
    }
}

fn run_oracle() -> Result<(), CliError> {
    let constants = PhysicalConstants::default();
    let omegas = FrequencyGrid::linspace(0.0, 2.0, 5)?;
    let mut checks = Vec::new();

    {
        let occ = OccupationSpec::with_mu(2.0, 0.3)?;
        let gamma = DissipationSpec::new(0.5)?;
        let tb = ring(1.0);
        let torus = conductivity_trace(&tb.finite_model(16)?, &occ, &gamma, &omegas, &constants)?;
        let band = conductivity_bloch(
            &tb.bloch_model()?,
            &occ,
            &gamma,
            &omegas,
            &BzGrid::Fixed(16),
            &constants,
        )?;
        checks.push(Check {
            name: "torus vs band route (chain)",
            deviation: relative_deviation(&torus, &band),
            tolerance: 1e-9,
        });
    }

    {
        let occ = OccupationSpec::with_mu(3.0, 0.2)?;
        let gamma = DissipationSpec::new(0.4)?;
        let tb = dimer_chain(1.0, 0.4);
        let torus = conductivity_trace(&tb.finite_model(16)?, &occ, &gamma, &omegas, &constants)?;
        let band = conductivity_bloch(
            &tb.bloch_model()?,
            &occ,
            &gamma,
            &omegas,
            &BzGrid::Fixed(16),
            &constants,
        )?;
        checks.push(Check {
            name: "torus vs band route (dimer)",
            deviation: relative_deviation(&torus, &band),
            tolerance: 1e-9,
        });
    }

    {
        let params = GrapheneParams::new(1.0, 1.0)?;
        let occ = OccupationSpec::with_mu(4.0, 0.0)?;
        let gamma = DissipationSpec::new(0.2)?;
        // honeycomb grids must avoid the zone corners (L not divisible by
        // 3): the closed form drops the singular Dirac-point factors that
        // the generic route resolves through its degeneracy kernel
        let grid = BzGrid::Fixed(32);
        let closed =
            conductivity_graphene_closed_form(&params, &occ, &gamma, &omegas, &grid, &constants)?;
        let band = conductivity_bloch(
            &kubo::graphene_bloch(&params)?,
            &occ,
            &gamma,
            &omegas,
            &grid,
            &constants,
        )?;
        checks.push(Check {
            name: "closed form vs band route (honeycomb)",
            deviation: relative_deviation(&closed.total, &band),
            tolerance: 1e-9,
        });
    }

    {
        let occ = OccupationSpec::with_mu(3.0, 0.2)?;
        let gamma = DissipationSpec::new(0.4)?;
        let model = dimer_chain(1.0, 0.4).bloch_model()?;
        let grid = BzGrid::Fixed(32);
        let full = conductivity_bloch(&model, &occ, &gamma, &omegas, &grid, &constants)?;
        let parts = drude_part(&model, &occ, &gamma, &omegas, &grid, &constants)?
            .entrywise_sum(&regular_part(&model, &occ, &gamma, &omegas, &grid, &constants)?);
        checks.push(Check {
            name: "intraband + interband partition (dimer)",
            deviation: relative_deviation(&full, &parts),
            tolerance: 1e-12,
        });
    }

    let mut failures = 0;
    for c in &checks {
        println!(
            "{:<42} max deviation {:.3e} (tolerance {:.1e}) {}",
            c.name,
            c.deviation,
            c.tolerance,
            if c.passed() { "ok" } else { "FAIL" }
        );
        if !c.passed() {
            failures += 1;
        }
    }
    if failures > 0 {
        return Err(CliError::Numerical(format!(
            "{failures} of {} oracle checks exceeded tolerance",
            checks.len()
        )));
    }
    Ok(())
}
