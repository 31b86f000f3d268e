//! Command-line front end for the conductivity engine: one run per process,
//! artifacts on disk with full metadata, exit code 0 on success, 1 on
//! invalid input, 2 on numerical non-convergence.

mod emit;
mod select;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use kubo::{
    conductivity_bloch, conductivity_graphene_closed_form, conductivity_trace, effective_mass,
    simulate_classical, simulate_quantum_ac, simulate_quantum_dc, BzGrid, ConductivityResult,
    DissipationSpec, DriveSpec, FrequencyGrid, KuboError, MassForm, Method, OccupationSpec,
    PhysicalConstants, ScatteringProcess,
};
use num_complex::Complex64;
use serde::Serialize;

/// Failures split by exit code: anything wrong with the request is 1,
/// a computation that ran but failed to converge is 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<KuboError> for CliError {
    fn from(e: KuboError) -> Self {
        match e {
            KuboError::NoConvergence(_) | KuboError::StepSizeTooCoarse { .. } => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "kubo",
    version,
    about = "Linear-response conductivity of non-interacting electron models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Frequency-resolved conductivity tensor of a model.
    Conductivity(ConductivityArgs),
    /// Occupation-averaged inverse effective-mass tensor.
    EffectiveMass(EffectiveMassArgs),
    /// Stochastic simulation of the driven dissipative quantum dynamics,
    /// reported against the trace-route linear response.
    SimulateQuantum(SimulateQuantumArgs),
    /// Stochastic simulation of the classical drift, reported against the
    /// analytic pole.
    SimulateClassical(SimulateClassicalArgs),
    /// Cross-check suites; nonzero exit if any deviation exceeds tolerance.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    /// Finite-torus trace route.
    Trace,
    /// Brillouin-zone band route.
    Bloch,
    /// Honeycomb closed form.
    ClosedForm,
    /// Closed form for graphene, band route for analytic Bloch families,
    /// trace route for finite and file-loaded models.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    /// Plain CSV plus a JSON metadata sidecar.
    Csv,
    /// Single self-describing JSON file.
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormArg {
    /// Velocity matrix elements weighted by the occupation derivative.
    MatrixElement,
    /// Band derivatives via the Hellmann-Feynman identity.
    BandVelocity,
    /// Band curvature from finite differences on the grid.
    BandCurvature,
}

impl From<FormArg> for MassForm {
    fn from(f: FormArg) -> Self {
        match f {
            FormArg::MatrixElement => MassForm::MatrixElement,
            FormArg::BandVelocity => MassForm::BandVelocity,
            FormArg::BandCurvature => MassForm::BandCurvature,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteArg {
    /// Route cross-checks: torus vs band, closed form vs band, and the
    /// intraband/interband partition.
    Oracle,
}

#[derive(clap::Args, Debug, Serialize)]
#[command(group(clap::ArgGroup::new("chem").required(true).args(["mu", "density"])))]
struct ConductivityArgs {
    /// Built-in model (free, chain, planewave, graphene) or model-file path.
    #[arg(long)]
    model: String,
    /// Evaluation route.
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    method: MethodArg,
    /// Inverse temperature (accepts `inf` for the zero-temperature limit).
    #[arg(long)]
    beta: f64,
    /// Chemical potential (exactly one of --mu / --density).
    #[arg(long)]
    mu: Option<f64>,
    /// Particle density per volume, resolved to a chemical potential.
    #[arg(long)]
    density: Option<f64>,
    /// Scattering rate, must be positive.
    #[arg(long)]
    gamma: f64,
    /// Frequency sweep: `min:max:count` (inclusive) or a comma-separated
    /// strictly increasing list.
    #[arg(long, default_value = "0:4:81")]
    omega: String,
    /// Torus size / k-points per axis; box length for the free gas.
    #[arg(long = "L", default_value_t = 64)]
    l: usize,
    /// Basis cutoff: momentum modes per side for `free` (integer),
    /// reciprocal-space radius for `planewave`.
    #[arg(long, default_value_t = 1.0)]
    cutoff: f64,
    /// Spatial dimension of the free gas.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Refine band-route grids by L-doubling to this relative tolerance.
    #[arg(long)]
    rtol: Option<f64>,
    /// Refinement cap for --rtol.
    #[arg(long, default_value_t = 3)]
    max_refinements: usize,
    /// Degeneracy tolerance override for intraband routing.
    #[arg(long)]
    eps_deg: Option<f64>,
    /// Output path.
    #[arg(short, long)]
    output: PathBuf,
    /// Output format.
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(clap::Args, Debug, Serialize)]
#[command(group(clap::ArgGroup::new("chem").required(true).args(["mu", "density"])))]
struct EffectiveMassArgs {
    /// Built-in model with a band family (chain, planewave, graphene) or
    /// model-file path.
    #[arg(long)]
    model: String,
    /// Which of the three equivalent expressions to evaluate.
    #[arg(long, value_enum, default_value_t = FormArg::MatrixElement)]
    form: FormArg,
    /// Inverse temperature (accepts `inf`).
    #[arg(long)]
    beta: f64,
    /// Chemical potential (exactly one of --mu / --density).
    #[arg(long)]
    mu: Option<f64>,
    /// Particle density per volume.
    #[arg(long)]
    density: Option<f64>,
    /// k-points per axis.
    #[arg(long = "L", default_value_t = 64)]
    l: usize,
    /// Reciprocal-space radius for `planewave`.
    #[arg(long, default_value_t = 1.0)]
    cutoff: f64,
    /// Refine by L-doubling to this relative tolerance.
    #[arg(long)]
    rtol: Option<f64>,
    /// Refinement cap for --rtol.
    #[arg(long, default_value_t = 3)]
    max_refinements: usize,
    /// Optional output path (the tensor is always printed).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(clap::Args, Debug, Serialize)]
#[command(group(clap::ArgGroup::new("chem").required(true).args(["mu", "density"])))]
struct SimulateQuantumArgs {
    /// Built-in model with a finite representation (chain, graphene) or
    /// model-file path.
    #[arg(long, default_value = "chain")]
    model: String,
    /// Torus size.
    #[arg(long = "L", default_value_t = 12)]
    l: usize,
    /// Inverse temperature; the harmonic drive requires it finite.
    #[arg(long)]
    beta: f64,
    /// Chemical potential (exactly one of --mu / --density).
    #[arg(long)]
    mu: Option<f64>,
    /// Particle density per volume.
    #[arg(long)]
    density: Option<f64>,
    /// Scattering (reset) rate of the Poisson clock.
    #[arg(long)]
    gamma: f64,
    /// Drive frequency; 0 selects the constant-field path.
    #[arg(long, default_value_t = 0.0)]
    omega: f64,
    /// Field amplitude per direction, comma-separated.
    #[arg(long, default_value = "0.001")]
    field: String,
    /// Number of scattering intervals to average.
    #[arg(long, default_value_t = 10_000)]
    n_events: usize,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drive-phase quadrature order of the harmonic path (min 4).
    #[arg(long, default_value_t = 8)]
    theta_nodes: usize,
    /// Optional output path (the estimate is always printed).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(clap::Args, Debug, Serialize)]
struct SimulateClassicalArgs {
    /// Inverse temperature; the drift current is independent of it.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Carrier density.
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    /// Carrier mass.
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    /// Scattering rate of the Poisson clock.
    #[arg(long)]
    gamma: f64,
    /// Drive frequency; 0 selects the constant-field path.
    #[arg(long, default_value_t = 0.0)]
    omega: f64,
    /// Field amplitude per direction, comma-separated.
    #[arg(long, default_value = "1")]
    field: String,
    /// Number of scattering intervals to average.
    #[arg(long, default_value_t = 100_000)]
    n_events: usize,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional output path (the estimate is always printed).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(clap::Args, Debug, Serialize)]
struct ValidateArgs {
    /// Which suite to run.
    #[arg(long, value_enum, default_value_t = SuiteArg::Oracle)]
    suite: SuiteArg,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    if let Err(e) = init_thread_pool() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }

    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(1),
                CliError::Numerical(_) => ExitCode::from(2),
            }
        }
    }
}

/// KUBO_THREADS caps the worker count; unset means hardware parallelism.
fn init_thread_pool() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("KUBO_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Usage(format!("KUBO_THREADS: expected a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn run(command: &Command) -> Result<(), CliError> {
    let echo = serde_json::to_value(command)
        .map_err(|e| CliError::Usage(format!("config echo: {e}")))?;
    match command {
        Command::Conductivity(a) => run_conductivity(a, echo),
        Command::EffectiveMass(a) => run_effective_mass(a, echo),
        Command::SimulateQuantum(a) => run_simulate_quantum(a, echo),
        Command::SimulateClassical(a) => run_simulate_classical(a, echo),
        Command::Validate(a) => validate::run_suite(a.suite),
    }
}

fn occupation(beta: f64, mu: Option<f64>, density: Option<f64>) -> Result<OccupationSpec, CliError> {
    match (mu, density) {
        (Some(m), None) => Ok(OccupationSpec::with_mu(beta, m)?),
        (None, Some(d)) => Ok(OccupationSpec::with_density(beta, d)?),
        // the chem argument group guarantees exactly one
        _ => Err(CliError::Usage("exactly one of --mu / --density required".into())),
    }
}

fn dissipation(gamma: f64, eps_deg: Option<f64>) -> Result<DissipationSpec, CliError> {
    Ok(match eps_deg {
        Some(e) => DissipationSpec::with_eps_deg(gamma, e)?,
        None => DissipationSpec::new(gamma)?,
    })
}

fn bz_grid(l: usize, rtol: Option<f64>, max_refinements: usize) -> BzGrid {
    match rtol {
        Some(rtol) => BzGrid::Refine { start: l, rtol, max_refinements },
        None => BzGrid::Fixed(l),
    }
}

/// `min:max:count` (inclusive endpoints) or a comma-separated strictly
/// increasing list; a bare number is a one-point list.
fn parse_sweep(spec: &str) -> Result<FrequencyGrid, CliError> {
    let bad = |msg: &str| CliError::Usage(format!("--omega: {msg}, got {spec:?}"));
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [min, max, count] = parts[..] else {
            return Err(bad("expected min:max:count"));
        };
        let min: f64 = min.trim().parse().map_err(|_| bad("sweep start is not a number"))?;
        let max: f64 = max.trim().parse().map_err(|_| bad("sweep end is not a number"))?;
        let count: usize = count.trim().parse().map_err(|_| bad("sweep count is not an integer"))?;
        return Ok(FrequencyGrid::linspace(min, max, count)?);
    }
    let values = spec
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|_| bad("expected a comma-separated list of numbers"))?;
    Ok(FrequencyGrid::new(values)?)
}

fn parse_field(spec: &str) -> Result<Vec<f64>, CliError> {
    let values = spec
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|_| CliError::Usage(format!("--field: expected comma-separated numbers, got {spec:?}")))?;
    Ok(values)
}

fn run_conductivity(args: &ConductivityArgs, echo: serde_json::Value) -> Result<(), CliError> {
    let started = Instant::now();
    let occ = occupation(args.beta, args.mu, args.density)?;
    let gamma = dissipation(args.gamma, args.eps_deg)?;
    let omegas = parse_sweep(&args.omega)?;
    let grid = bz_grid(args.l, args.rtol, args.max_refinements);
    let sel = select::conductivity_route(&args.model, args.method, args.l, args.cutoff, args.dim)?;

    let method = sel.method;
    let result: ConductivityResult = match sel.route {
        select::Route::Torus(model) => {
            conductivity_trace(&model, &occ, &gamma, &omegas, &sel.constants)?
        }
        select::Route::Band(model) => {
            conductivity_bloch(&model, &occ, &gamma, &omegas, &grid, &sel.constants)?
        }
        select::Route::Closed(params) => {
            conductivity_graphene_closed_form(&params, &occ, &gamma, &omegas, &grid, &sel.constants)?
                .total
        }
    };

    let ctx = emit::RunContext {
        echo,
        method: Some(method),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    emit::write_conductivity(&result, &ctx, &args.output, args.format)?;
    Ok(())
}

fn run_effective_mass(args: &EffectiveMassArgs, echo: serde_json::Value) -> Result<(), CliError> {
    let started = Instant::now();
    let occ = occupation(args.beta, args.mu, args.density)?;
    let grid = bz_grid(args.l, args.rtol, args.max_refinements);
    let (model, constants) = select::band_model(&args.model, args.cutoff)?;
    let tensor = effective_mass(&model, &occ, &grid, args.form.into(), &constants)?;

    let d = tensor.inv_m.nrows();
    println!("inverse effective-mass tensor (1/mass units):");
    for l in 0..d {
        let row: Vec<String> =
            (0..d).map(|m| format!("{:+.12e}", tensor.inv_m[(l, m)])).collect();
        println!("  [{}]", row.join(", "));
    }

    if let Some(path) = &args.output {
        let ctx = emit::RunContext {
            echo,
            method: Some(Method::Bloch),
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        let rows: Vec<Vec<f64>> =
            tensor.inv_m.rows().into_iter().map(|r| r.to_vec()).collect();
        emit::write_mass(&rows, &ctx, path, args.format)?;
    }
    Ok(())
}

fn run_simulate_quantum(args: &SimulateQuantumArgs, echo: serde_json::Value) -> Result<(), CliError> {
    let started = Instant::now();
    let occ = occupation(args.beta, args.mu, args.density)?;
    let field = parse_field(&args.field)?;
    let process = ScatteringProcess::new(args.gamma, args.seed, args.n_events)?;
    let (model, constants) = select::finite_model(&args.model, args.l)?;
    let d = model.spatial_dim;

    let (estimate, stderr): (Vec<Complex64>, Vec<f64>) = if args.omega == 0.0 {
        let drive = DriveSpec::dc(field.clone())?;
        let est = simulate_quantum_dc(&model, &occ, &process, &drive, &constants)?;
        (est.current.iter().map(|&j| Complex64::new(j, 0.0)).collect(), est.stderr)
    } else {
        let drive = DriveSpec::ac(field.clone(), args.omega)?.with_theta_nodes(args.theta_nodes)?;
        let est = simulate_quantum_ac(&model, &occ, &process, &drive, &constants)?;
        (est.current, est.stderr)
    };

    // linear-response prediction from the trace route at the drive frequency
    let sigma = conductivity_trace(
        &model,
        &occ,
        &DissipationSpec::new(args.gamma)?,
        &FrequencyGrid::single(args.omega)?,
        &constants,
    )?;
    let reference: Vec<Complex64> = (0..d)
        .map(|l| (0..d).map(|m| sigma.entry(0, l, m) * field[m]).sum())
        .collect();

    let rows = emit::estimate_rows(&estimate, &stderr, &reference);
    emit::print_estimates(&rows, "sigma*E (trace route)");
    if let Some(path) = &args.output {
        let ctx = emit::RunContext {
            echo,
            method: Some(Method::DynamicsQuantum),
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        emit::write_estimates(&rows, "reference", &ctx, path, args.format)?;
    }
    Ok(())
}

fn run_simulate_classical(
    args: &SimulateClassicalArgs,
    echo: serde_json::Value,
) -> Result<(), CliError> {
    let started = Instant::now();
    let field = parse_field(&args.field)?;
    let process = ScatteringProcess::new(args.gamma, args.seed, args.n_events)?;
    let drive = if args.omega == 0.0 {
        DriveSpec::dc(field)?
    } else {
        DriveSpec::ac(field, args.omega)?
    };
    let constants = PhysicalConstants::default();
    let est = simulate_classical(&process, args.beta, args.density, args.mass, &drive, &constants)?;

    let rows = emit::estimate_rows(&est.current, &est.stderr, &est.analytic);
    emit::print_estimates(&rows, "analytic");
    if let Some(path) = &args.output {
        let ctx = emit::RunContext {
            echo,
            method: Some(Method::DynamicsClassical),
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        emit::write_estimates(&rows, "analytic", &ctx, path, args.format)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_triple_is_inclusive() {
        let g = parse_sweep("0:4:81").unwrap();
        assert_eq!(g.len(), 81);
        assert_eq!(g.omegas()[0], 0.0);
        assert_eq!(g.omegas()[80], 4.0);
    }

    #[test]
    fn sweep_list_and_single_value() {
        assert_eq!(parse_sweep("0.5").unwrap().omegas(), &[0.5]);
        assert_eq!(parse_sweep("0, 1, 2.5").unwrap().omegas(), &[0.0, 1.0, 2.5]);
    }

    #[test]
    fn sweep_rejects_malformed_specs() {
        for bad in ["0:4", "0:4:81:2", "a:b:c", "1,0", "", "0:4:-1"] {
            assert!(parse_sweep(bad).is_err(), "{bad:?} should be rejected");
        }
    }

    #[test]
    fn sweep_count_zero_is_an_empty_grid() {
        assert!(parse_sweep("0:4:0").unwrap().is_empty());
    }

    #[test]
    fn field_lists_parse() {
        assert_eq!(parse_field("0.001").unwrap(), vec![0.001]);
        assert_eq!(parse_field("1, -2").unwrap(), vec![1.0, -2.0]);
        assert!(parse_field("x").is_err());
    }

    #[test]
    fn chem_spec_requires_exactly_one() {
        assert!(occupation(1.0, Some(0.1), Some(0.2)).is_err());
        assert!(occupation(1.0, None, None).is_err());
        assert!(occupation(1.0, Some(0.1), None).is_ok());
    }

    #[test]
    fn cli_declares_conflicting_chem_flags() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let r = Cli::try_parse_from([
            "kubo",
            "conductivity",
            "--model",
            "chain",
            "--beta",
            "1",
            "--mu",
            "0",
            "--density",
            "0.5",
            "--gamma",
            "0.5",
            "-o",
            "out.csv",
        ]);
        assert!(r.is_err());
    }
}
