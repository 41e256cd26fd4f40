//! `lec`: validate inputs, compute grid intensity and baselines, optimise the
//! community battery and export models.
//!
//! Exit codes: 0 success, 1 invalid input, 2 solver failure or infeasibility,
//! 3 file-system error.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lec_core::ingest::{self, IngestError, LoadedRun, RunConfig};
use lec_core::report;
use lec_core::scenario::ScenarioError;
use lec_core::{compute_baseline, model, run_matrix, ModelError, Objective, Scenario, SharingStrategy};
use lec_milp::export_lp_text;

#[derive(Parser)]
#[command(name = "lec", version, about = "Schedule a shared community battery against price or grid emissions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the community inputs and list every problem found.
    Validate(Common),
    /// Hourly grid carbon intensity from a generation-mix file.
    Gwp(GwpArgs),
    /// Cost and emissions when all load is bought from the grid.
    Baseline(Common),
    /// Optimise each selected scenario and settle it per participant.
    Optimize(OptimizeArgs),
    /// Write one day's model in LP format.
    ExportLp(ExportArgs),
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// VAT rate applied to buy prices, overriding the config.
    #[arg(long)]
    vat: Option<f64>,
    /// Emission-factor overrides (`source,factor` CSV).
    #[arg(long)]
    factors: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    /// Cap each day's compensated export at that day's purchases.
    #[arg(long)]
    compensation_cap: bool,
    /// Battery calendar-ageing cost, €/h.
    #[arg(long)]
    kcal_per_hour: Option<f64>,
    /// Battery throughput cost, € per kWh charged or discharged.
    #[arg(long)]
    kcal_per_kwh: Option<f64>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelArgs,
    /// Objectives to run; all when omitted.
    #[arg(long, value_enum)]
    objective: Vec<ObjectiveArg>,
    /// Sharing strategies to run; all when omitted.
    #[arg(long, value_enum)]
    sharing: Vec<SharingArg>,
    /// Feasibility tolerance of the post-solve check.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Print the reports as JSON instead of tables.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value = "price")]
    objective: ObjectiveArg,
    #[arg(long, value_enum, default_value = "static")]
    sharing: SharingArg,
    /// Zero-based day of the horizon.
    #[arg(long, default_value_t = 0)]
    day: usize,
}

#[derive(Args)]
struct GwpArgs {
    /// Wide generation-mix CSV; taken from the config when omitted.
    #[arg(long, required_unless_present = "config")]
    mix: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Emission-factor overrides (`source,factor` CSV).
    #[arg(long)]
    factors: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Price,
    Environment,
}

impl From<ObjectiveArg> for Objective {
    fn from(value: ObjectiveArg) -> Self {
        match value {
            ObjectiveArg::Price => Objective::Price,
            ObjectiveArg::Environment => Objective::Environment,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SharingArg {
    Static,
    Variable,
}

impl From<SharingArg> for SharingStrategy {
    fn from(value: SharingArg) -> Self {
        match value {
            SharingArg::Static => SharingStrategy::FixedCoefficients,
            SharingArg::Variable => SharingStrategy::OptimizeHourlyAllocation,
        }
    }
}

/// A failure with its exit code.
#[derive(Debug)]
enum Failure {
    Invalid(String),
    Solver(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Solver(m) | Failure::Io(m) => m,
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io { .. } => Failure::Io(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Invalid(_) | ScenarioError::Model(_) | ScenarioError::ParticipantMismatch { .. } => {
                Failure::Invalid(e.to_string())
            }
            other => Failure::Solver(other.to_string()),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn io_failure(path: &Path, e: impl Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| io_failure(&path, e))
}

fn load_config(common: &Common, model: Option<&ModelArgs>) -> Result<RunConfig, Failure> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(vat) = common.vat {
        config.vat_rate = vat;
    }
    if let Some(factors) = &common.factors {
        // Command-line paths are relative to the working directory.
        config.inputs.factors = Some(std::path::absolute(factors).map_err(|e| io_failure(factors, e))?);
    }
    if let Some(model) = model {
        let bess = config.bess.get_or_insert_with(Default::default);
        if let Some(v) = model.kcal_per_hour {
            bess.calendar_cost_per_hour = v;
        }
        if let Some(v) = model.kcal_per_kwh {
            bess.throughput_cost_per_kwh = v;
        }
        config.compensation_cap |= model.compensation_cap;
    }
    Ok(config)
}

/// Loads inputs and rejects an invalid community with its full report.
fn load_valid(config: &RunConfig) -> Result<LoadedRun, Failure> {
    let run = config.load_inputs()?;
    let issues = run.spec.validate();
    if !issues.is_empty() {
        return Err(Failure::Invalid(format!("invalid community:\n{issues}")));
    }
    Ok(run)
}

fn validate(common: &Common) -> Result<(), Failure> {
    let config = load_config(common, None)?;
    load_valid(&config)?;
    println!("ok: {} is a valid community", common.config.display());
    Ok(())
}

fn gwp(args: &GwpArgs) -> Result<(), Failure> {
    let (mix_path, mut overrides) = match &args.config {
        Some(path) => {
            let config = RunConfig::load(path)?;
            let mix = match (&args.mix, &config.inputs.mix) {
                (Some(m), _) => m.clone(),
                (None, Some(m)) => config.resolve(m),
                (None, None) => return Err(Failure::Invalid(format!("{}: no generation mix input", path.display()))),
            };
            let overrides = match &config.inputs.factors {
                Some(f) => ingest::load_factor_overrides(&config.resolve(f))?,
                None => Vec::new(),
            };
            (mix, overrides)
        }
        None => (args.mix.clone().expect("clap requires --mix without --config"), Vec::new()),
    };
    if let Some(path) = &args.factors {
        overrides.extend(ingest::load_factor_overrides(path)?);
    }
    let factors = ingest::factor_table(&overrides).map_err(|e| Failure::Invalid(e.to_string()))?;
    let mix = ingest::load_mix_csv(&mix_path)?;
    let series = lec_core::intensity_series(&mix, &factors).map_err(|e| Failure::Invalid(e.to_string()))?;
    let mut csv = String::from("ts,gwp\n");
    for (ts, v) in series.timestamps().zip(series.values()) {
        csv.push_str(&format!("{},{}\n", ts.format(lec_core::domain::TIMESTAMP_FORMAT), report::fixed(*v, 6)));
    }
    match &args.out {
        Some(dir) => write_file(dir, "gwp.csv", &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn baseline(common: &Common) -> Result<(), Failure> {
    let config = load_config(common, None)?;
    let run = load_valid(&config)?;
    let baseline = compute_baseline(&run.spec);
    print!("{}", report::baseline_table(&baseline));
    if let Some(dir) = &common.out {
        write_file(dir, "baseline.csv", &report::baseline_csv(&baseline))?;
        write_file(dir, "baseline.json", &report::to_json(&baseline))?;
    }
    Ok(())
}

fn optimize(args: &OptimizeArgs) -> Result<(), Failure> {
    let mut config = load_config(&args.common, Some(&args.model))?;
    if let Some(tol) = args.tolerance {
        config.solver.tolerance = Some(tol);
    }
    let run = load_valid(&config)?;
    let objectives: Vec<Objective> = if args.objective.is_empty() {
        vec![Objective::Price, Objective::Environment]
    } else {
        args.objective.iter().map(|&o| o.into()).collect()
    };
    let strategies: Vec<SharingStrategy> = if args.sharing.is_empty() {
        vec![SharingStrategy::FixedCoefficients, SharingStrategy::OptimizeHourlyAllocation]
    } else {
        args.sharing.iter().map(|&s| s.into()).collect()
    };
    let scenarios: Vec<Scenario> = objectives
        .iter()
        .flat_map(|&objective| strategies.iter().map(move |&sharing| Scenario { objective, sharing }))
        .collect();

    let baseline = compute_baseline(&run.spec);
    let reports = run_matrix(&run.spec, &scenarios, &config.run_options())
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    if args.json {
        print!("{}", report::to_json(&reports));
    } else {
        print!("{}", report::baseline_table(&baseline));
        for r in &reports {
            println!();
            print!("{}", report::settlement_table(r));
        }
    }
    if let Some(dir) = &args.common.out {
        write_file(dir, "baseline.csv", &report::baseline_csv(&baseline))?;
        write_file(dir, "baseline.json", &report::to_json(&baseline))?;
        for r in &reports {
            write_file(dir, &format!("{}.json", r.scenario), &report::to_json(r))?;
            write_file(dir, &format!("{}.csv", r.scenario), &report::settlement_csv(r))?;
            write_file(dir, &format!("{}-trace.csv", r.scenario), &report::trace_csv(r))?;
        }
    }
    Ok(())
}

fn export_lp(args: &ExportArgs) -> Result<(), Failure> {
    let config = load_config(&args.common, Some(&args.model))?;
    let run = load_valid(&config)?;
    let window_hours = config.run_options().window_hours;
    let offset = args.day * window_hours;
    if offset >= run.spec.horizon_hours {
        return Err(Failure::Invalid(format!(
            "day {} is outside the {}-hour horizon",
            args.day, run.spec.horizon_hours
        )));
    }
    let window = run.spec.window(offset, window_hours);
    let built = model::build(&window, args.objective.into(), args.sharing.into())?;
    let text = export_lp_text(&built.problem);
    match &args.common.out {
        Some(dir) => write_file(dir, &format!("{}-day{}.lp", model::scenario_label(built.objective, built.sharing), args.day), &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(args) => validate(args),
        Command::Gwp(args) => gwp(args),
        Command::Baseline(args) => baseline(args),
        Command::Optimize(args) => optimize(args),
        Command::ExportLp(args) => export_lp(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
