//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use aloha_core::stability::{classify_finite, classify_slotted};
use aloha_core::tail::fit_loglog_slope;
use aloha_core::{FiniteModelParams, PacketDistribution, StabilityVerdict};
use clap::{Args, Parser, Subcommand};

use crate::config::{EngineKind, ExperimentConfig};
use crate::error::{AppError, Result};
use crate::experiment::{bounds_grid, run_experiment, write_bounds};
use crate::output::{parse_window, read_ccdf, FitSummary};
use crate::presets::{reproduce, Figure, Scale};

#[derive(Debug, Parser)]
#[command(
    name = "aloha",
    version,
    about = "ALOHA delay simulators and tail analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the finite-population unslotted model.
    FiniteSim(SimArgs),
    /// Simulate slotted ALOHA with a random number of users.
    SlottedSim(SimArgs),
    /// Tabulate the lower and upper power-law bounds on the retransmission count.
    Bounds(BoundsArgs),
    /// Fit a log-log slope to a ccdf.csv.
    Fit(FitArgs),
    /// Classify throughput stability.
    Classify(ClassifyArgs),
    /// Run a preset figure experiment set.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's worker count.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long = "M")]
    pub users: usize,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub nu: f64,
    /// Rate of the exponential packet length.
    #[arg(long)]
    pub mu: f64,
    #[arg(long)]
    pub n_max: u64,
    /// Log-spaced points per decade beyond n = 100.
    #[arg(long, default_value_t = 20)]
    pub per_decade: u32,
    /// CSV destination; `-` writes to stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub ccdf: PathBuf,
    #[arg(long, default_value = "1e-3:1e-1")]
    pub window: String,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long = "M", requires_all = ["lambda", "mu"], conflicts_with = "alpha")]
    pub users: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub nu: f64,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Decay rate of the user-count law (slotted form).
    #[arg(long, required_unless_present = "users")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub figure: Figure,
    #[arg(long, value_enum, default_value = "desk")]
    pub scale: Scale,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| AppError::io(Path::new("<stdout>"), e))
}

fn simulate(engine: EngineKind, args: &SimArgs) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if config.engine != engine {
        return Err(AppError::config(format!(
            "{}: engine is `{}`, expected `{}`",
            args.config.display(),
            config.engine.name(),
            engine.name()
        )));
    }
    if args.workers.is_some() {
        config.workers = args.workers;
        config.validate()?;
    }
    let result = run_experiment(&config, &args.out)?;
    print_json(&serde_json::json!({
        "out": result.out_dir,
        "rows": result.rows,
        "fit": result.fit,
    }))
}

fn bounds(args: &BoundsArgs) -> Result<()> {
    let params = FiniteModelParams::new(
        args.users,
        args.lambda,
        args.nu,
        PacketDistribution::exponential(args.mu)?,
    )?;
    let grid = bounds_grid(args.n_max, args.per_decade);
    if args.out == Path::new("-") {
        write_bounds(&mut std::io::stdout().lock(), &params, &grid)
    } else {
        let mut file = crate::output::create(&args.out)?;
        write_bounds(&mut file, &params, &grid)
    }
}

fn fit(args: &FitArgs) -> Result<()> {
    let window = parse_window(&args.window)?;
    let points = read_ccdf(&args.ccdf)?;
    let fit = fit_loglog_slope(&points, window)?;
    print_json(&FitSummary::from_fit(&fit, points.sample_count))
}

fn verdict_json(v: StabilityVerdict) -> serde_json::Value {
    serde_json::json!({ "verdict": v.verdict.name(), "rule": v.rule })
}

fn classify(args: &ClassifyArgs) -> Result<()> {
    let v = match (args.users, args.alpha) {
        (Some(m), None) => classify_finite(
            m,
            args.lambda.expect("clap requires lambda"),
            args.nu,
            args.mu.expect("clap requires mu"),
        )?,
        (None, Some(alpha)) => classify_slotted(alpha, args.nu)?,
        _ => return Err(AppError::config("give either --M/--lambda/--mu or --alpha")),
    };
    print_json(&verdict_json(v))
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::FiniteSim(a) => simulate(EngineKind::Finite, a),
        Command::SlottedSim(a) => simulate(EngineKind::Slotted, a),
        Command::Bounds(a) => bounds(a),
        Command::Fit(a) => fit(a),
        Command::Classify(a) => classify(a),
        Command::Reproduce(a) => {
            if a.workers == Some(0) {
                return Err(AppError::config("workers must be >= 1"));
            }
            let r = reproduce(a.figure, a.scale, &a.out, a.workers)?;
            print_json(&serde_json::json!({ "summary": r.summary_path }))
        }
    }
}
