//! `efleet`: generate, solve, validate and benchmark mixed-fleet bus schedules.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use efleet_core::colgen::{run_cg_best, trace_csv, CGConfig};
use efleet_core::exact::solve_instance;
use efleet_core::finance::EconInputs;
use efleet_core::validator::validate;
use efleet_core::{Instance, Network, Solution};
use efleet_harness::generate::{generate_instance, GenerateOptions};
use efleet_harness::gtfs::{ingest_gtfs, pool_from_feed, Infrastructure, IngestOptions};
use efleet_harness::matrix::{load_records, run_matrix, MatrixConfig};
use efleet_harness::pool::{synthetic_pool, SyntheticConfig, TripPool};
use efleet_harness::report::write_report;

type AnyResult<T> = std::result::Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "efleet", version, about = "Mixed-fleet bus scheduling with capacity-constrained charging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an instance from a trip pool.
    Generate(GenerateArgs),
    /// Read a GTFS feed and a charger file into a trip pool.
    Ingest(IngestArgs),
    /// Solve an instance with the time-indexed MILP.
    Exact(ExactArgs),
    /// Solve an instance by column generation.
    Cg(CgArgs),
    /// Check a solution against an instance; exits 1 on any violation.
    Validate(ValidateArgs),
    /// Run an experiment matrix and write runs.csv.
    Matrix(MatrixArgs),
    /// Summary tables and plots from a runs.csv.
    Report(ReportArgs),
}

#[derive(Args)]
struct PoolSource {
    /// Trip pool file written by `efleet ingest`.
    #[arg(long, conflicts_with = "synthetic")]
    pool: Option<PathBuf>,
    /// Use the built-in synthetic network drawn with this seed.
    #[arg(long)]
    synthetic: Option<u64>,
}

impl PoolSource {
    fn load(&self) -> AnyResult<TripPool> {
        match (&self.pool, self.synthetic) {
            (Some(path), _) => Ok(TripPool::load(path)?),
            (None, seed) => Ok(synthetic_pool(&SyntheticConfig::default(), seed.unwrap_or(0))?),
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    source: PoolSource,
    /// Number of trips.
    #[arg(long)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Charger grid resolution, minutes.
    #[arg(long, default_value_t = 5.0)]
    tdelta: f64,
    /// Economic inputs (JSON) replacing the defaults.
    #[arg(long)]
    econ: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    /// Directory with stops.txt, trips.txt and stop_times.txt.
    #[arg(long)]
    feed: PathBuf,
    /// JSON file with garages and on-route chargers.
    #[arg(long)]
    infrastructure: PathBuf,
    /// Keep only these service ids (repeatable).
    #[arg(long = "service")]
    services: Vec<String>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    econ: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveOutput {
    /// Solution document path; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append the cost-breakdown row to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ExactArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Charger grid resolution in minutes, overriding the instance.
    #[arg(long)]
    tdelta: Option<f64>,
    #[command(flatten)]
    output: SolveOutput,
}

#[derive(Args)]
struct CgArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 10)]
    replicas: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seconds per replica.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Price BEB columns with the single-vehicle MILP.
    #[arg(long)]
    exact_pricing: bool,
    #[arg(long)]
    tdelta: Option<f64>,
    /// Per-iteration trace of the best replica.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    output: SolveOutput,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    solution: PathBuf,
}

#[derive(Args)]
struct MatrixArgs {
    #[command(flatten)]
    source: PoolSource,
    /// Matrix configuration (JSON); defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    econ: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// runs.csv written by `efleet matrix`.
    #[arg(long)]
    runs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn load_econ(path: Option<&Path>) -> AnyResult<EconInputs> {
    match path {
        Some(p) => Ok(EconInputs::from_json(&fs::read_to_string(p)?)?),
        None => Ok(EconInputs::default()),
    }
}

fn load_network(path: &Path, tdelta: Option<f64>) -> AnyResult<Network> {
    let mut inst = Instance::load(path)?;
    if let Some(step) = tdelta {
        inst.params.time_step = step;
    }
    Ok(Network::new(inst)?)
}

fn emit(solution: &Solution, output: &SolveOutput) -> AnyResult<()> {
    match &output.out {
        Some(path) => solution.save(path)?,
        None => println!("{}", solution.to_json()?),
    }
    match &output.csv {
        Some(path) => {
            let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            if fresh {
                writeln!(f, "{}", Solution::CSV_HEADER)?;
            }
            writeln!(f, "{}", solution.csv_row())?;
        }
        None => eprintln!("{}\n{}", Solution::CSV_HEADER, solution.csv_row()),
    }
    Ok(())
}

fn run(cli: Cli) -> AnyResult<ExitCode> {
    match cli.command {
        Command::Generate(a) => {
            let pool = a.source.load()?;
            let opts = GenerateOptions { time_step: a.tdelta, econ: load_econ(a.econ.as_deref())? };
            let inst = generate_instance(&pool, a.size, a.seed, &opts)?;
            inst.save(&a.out)?;
            log::info!("wrote {} with {} trips", a.out.display(), inst.trips.len());
        }
        Command::Ingest(a) => {
            let mut opts = IngestOptions::new();
            opts.services = a.services;
            let feed = ingest_gtfs(&a.feed, &opts)?;
            let infra = Infrastructure::load(&a.infrastructure)?;
            let name = a.name.unwrap_or_else(|| {
                a.feed.file_name().map_or("pool".into(), |n| n.to_string_lossy().into_owned())
            });
            let pool = pool_from_feed(&name, &feed, &infra, &load_econ(a.econ.as_deref())?);
            pool.save(&a.out)?;
            println!("{}", serde_json::to_string_pretty(&feed.report)?);
        }
        Command::Exact(a) => {
            let net = load_network(&a.instance, a.tdelta)?;
            let solution = solve_instance(&net, a.time_limit)?;
            emit(&solution, &a.output)?;
        }
        Command::Cg(a) => {
            let net = load_network(&a.instance, a.tdelta)?;
            let config =
                CGConfig { seed: a.seed, time_limit: a.time_limit, exact_pricing: a.exact_pricing, ..CGConfig::default() };
            let outcome = run_cg_best(&net, &config, a.replicas)?;
            if let Some(path) = &a.trace {
                fs::write(path, trace_csv(&outcome.trace))?;
            }
            emit(&outcome.solution, &a.output)?;
        }
        Command::Validate(a) => {
            let net = load_network(&a.instance, None)?;
            let solution = Solution::load(&a.solution)?;
            let violations = validate(&solution, &net)?;
            for v in &violations {
                println!("{v}");
            }
            if !violations.is_empty() {
                return Ok(ExitCode::from(1));
            }
            println!("ok");
        }
        Command::Matrix(a) => {
            let pool = a.source.load()?;
            let mut config: MatrixConfig = match &a.config {
                Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
                None => MatrixConfig::default(),
            };
            if let Some(w) = a.workers {
                config.workers = w;
            }
            if a.econ.is_some() {
                config.econ = load_econ(a.econ.as_deref())?;
            }
            let records = run_matrix(&pool, &config, &a.out)?;
            let failed = records.iter().filter(|r| !r.error.is_empty()).count();
            log::info!("{} runs, {failed} failed", records.len());
        }
        Command::Report(a) => {
            let records = load_records(&a.runs)?;
            for path in write_report(&records, &a.out)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
