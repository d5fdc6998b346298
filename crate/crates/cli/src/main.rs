//! `tevim` — treatment-effect variable importance from the command line.
//!
//! Three subcommands: `estimate` analyzes a CSV dataset and writes a report,
//! `simulate` runs the sampling study and writes a metrics table, `truths`
//! prints the simulation design's true values. All outputs are deterministic
//! given the seed, independent of thread count.

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tevim::data::{CsvSchema, Dataset, Mode};
use tevim::simulation::{monte_carlo, true_values, McGrid};
use tevim::{Error, Result};

use config::{EstimateOverrides, SimulateOverrides};

#[derive(Parser)]
#[command(
    name = "tevim",
    version,
    about = "Treatment-effect variable importance: estimation, simulation, ground truths"
)]
struct Cli {
    /// Cap the worker-thread pool (default: one thread per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a CSV dataset; writes report.json and subsets.csv.
    Estimate(EstimateArgs),
    /// Run the sampling study; writes metrics.csv and summary.json.
    Simulate(SimulateArgs),
    /// Print the simulation design's true values as JSON.
    Truths(TruthsArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// JSON run config; see the README for the schema.
    #[arg(long)]
    config: PathBuf,
    /// Override: estimation flavour (1A, 1B, 2A, 2B).
    #[arg(long)]
    algorithm: Option<String>,
    /// Override: cross-fitting fold count.
    #[arg(long)]
    folds: Option<usize>,
    /// Override: master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override: propensity clip in (0, 0.5).
    #[arg(long)]
    clip: Option<f64>,
    /// Override: subsets as column groups, e.g. "x1,x2;x3".
    #[arg(long)]
    subsets: Option<String>,
    /// Override: treatment regime (binary or continuous).
    #[arg(long)]
    mode: Option<String>,
    /// Directory for report.json and subsets.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON study config; defaults to the desk-scale study when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override: master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override: cross-fitting fold count.
    #[arg(long)]
    folds: Option<usize>,
    /// Override: propensity clip in (0, 0.5).
    #[arg(long)]
    clip: Option<f64>,
    /// Override: replicates per cell.
    #[arg(long)]
    replicates: Option<usize>,
    /// Directory for metrics.csv and summary.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct TruthsArgs {
    /// Quadrature nodes per axis (minimum 1000).
    #[arg(long, default_value_t = 2000)]
    resolution: usize,
    /// Also write truths.json into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = if err.is_usage() { "config" } else { "estimation" };
            let detail = serde_json::json!({
                "error": { "kind": kind, "message": err.to_string() }
            });
            eprintln!("{detail}");
            ExitCode::from(if err.is_usage() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::InvalidConfig("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("building the thread pool: {e}")))?;
    }
    match cli.command {
        Command::Estimate(args) => cmd_estimate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Truths(args) => cmd_truths(args),
    }
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let mut cfg = config::load_run_config(&args.config)?;
    let overrides = EstimateOverrides {
        algorithm: args.algorithm,
        folds: args.folds,
        seed: args.seed,
        clip: args.clip,
        subsets: args.subsets,
        mode: args.mode,
    };
    overrides.apply(&mut cfg)?;

    let data_path = config::resolve_data_path(&args.config, &cfg.data);
    let header = config::csv_header(&data_path)?;
    cfg.resolve(&header)?;

    let schema = CsvSchema {
        outcome: cfg.schema.outcome.clone(),
        treatment: cfg.schema.treatment.clone(),
        covariates: cfg.schema.covariates.clone().expect("resolve() fills the covariates"),
        mode: cfg.mode,
    };
    let data = Dataset::<f64>::from_csv(&data_path, &schema)?;
    let (subsets, names) = config::resolve_subsets(&cfg, &data)?;
    let algo = cfg.to_algorithm_config(subsets)?;

    let z = tevim::stats::Z_95;
    let estimates = match cfg.mode {
        Mode::Binary => tevim::crossfit::run_algorithm(&data, &algo)?,
        Mode::Continuous => tevim::continuous::run_continuous(&data, &algo, cfg.variance_floor)?,
    };
    let summary = tevim::estimands::summarize(&estimates, &algo.subsets, z)?;
    let null_tests = if cfg.null_test {
        Some(tevim::estimands::split_sample_null_test(&data, &algo, z)?)
    } else {
        None
    };

    let (report_path, csv_path) =
        report::write_estimate(&args.out, &cfg, &summary, null_tests.as_deref(), &names)?;
    println!("wrote {} and {}", report_path.display(), csv_path.display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => config::load_simulate_config(path)?,
        None => config::SimulateConfig::default(),
    };
    let overrides = SimulateOverrides {
        seed: args.seed,
        folds: args.folds,
        clip: args.clip,
        replicates: args.replicates,
    };
    overrides.apply(&mut cfg);

    let algorithms = cfg.parsed_algorithms()?;
    let truths = true_values(cfg.truth_resolution)?;
    let grid = McGrid {
        sample_sizes: cfg.sample_sizes.clone(),
        algorithms,
        learners: cfg.learners.iter().map(|l| (l.name.clone(), l.spec.clone())).collect(),
        folds: cfg.folds,
        clip: cfg.clip,
    };
    let rows = monte_carlo(&grid, cfg.replicates, cfg.seed, &truths)?;

    let (metrics_path, summary_path) = report::write_simulate(&args.out, &cfg, &truths, &rows)?;
    println!("wrote {} and {}", metrics_path.display(), summary_path.display());
    Ok(())
}

fn cmd_truths(args: TruthsArgs) -> Result<()> {
    let truths = true_values(args.resolution)?;
    print!("{}", report::truths_text(&truths)?);
    if let Some(out_dir) = &args.out {
        report::write_truths(out_dir, &truths)?;
    }
    Ok(())
}
