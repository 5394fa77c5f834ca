//! Command-line front end: trajectories, sweeps, experiment comparisons,
//! and coherence diagnostics, with CSV/JSON outputs and static SVG plots.

mod commands;
mod manifest;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "inversion", version, about = "Collision-broadening simulator for a two-level transition")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory (default: $INVERSION_OUTDIR or the current directory)
    #[arg(long, global = true)]
    outdir: Option<PathBuf>,

    /// JSON config file supplying defaults; explicit flags win on conflict
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Emit runtime errors as JSON on standard error
    #[arg(long, global = true)]
    json_errors: bool,

    /// Cap the worker thread count (does not change results)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a single occupancy trajectory
    Trajectory(TrajectoryArgs),
    /// Sweep the impact rate, fitting the lineshape at each grid point
    Sweep(SweepArgs),
    /// Compare a sweep against an experimental dataset
    Compare(CompareArgs),
    /// Coherence and localization diagnostics over an ensemble
    Coherence(CoherenceArgs),
}

#[derive(Args)]
struct TrajectoryArgs {
    /// Model preset: nh3 or nd3
    #[arg(long, default_value = "nh3")]
    preset: String,

    /// Override the perturbation strength (angular frequency)
    #[arg(long)]
    omega_p: Option<f64>,

    /// Impacts per cycle
    #[arg(long, default_value_t = 0.0)]
    p: f64,

    /// Record length in cycles
    #[arg(long)]
    cycles: Option<u32>,

    /// Sampling interval (number or fraction like 1/64)
    #[arg(long)]
    dt: Option<String>,

    #[arg(long)]
    seed: Option<u64>,

    /// Impact side policy: left or random
    #[arg(long, default_value = "random")]
    side: String,

    /// Scripted impacts `t:duration,...` (duration in time units or `auto`);
    /// overrides the stochastic process
    #[arg(long)]
    impacts: Option<String>,

    /// Output CSV path (relative to the output directory)
    #[arg(long, default_value = "trajectory.csv")]
    out: PathBuf,

    /// Also write an SVG line plot
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// nh3 | nd3 | classical-full | classical-continuous | custom
    #[arg(long)]
    model: String,

    /// Perturbation strength for --model custom (angular frequency)
    #[arg(long)]
    omega_p: Option<f64>,

    /// Impact-rate grid `start:stop:step` (or a single value)
    #[arg(long)]
    p: String,

    /// Trajectories per grid point
    #[arg(long)]
    ensemble: Option<usize>,

    #[arg(long)]
    cycles: Option<u32>,

    /// Sampling interval (number or fraction like 1/64)
    #[arg(long)]
    dt: Option<String>,

    #[arg(long)]
    seed: Option<u64>,

    /// Impact weakening factor for classical models
    #[arg(long)]
    epsilon: Option<f64>,

    /// Velocity draw for the continuity-constrained model:
    /// amplitude-uniform | speed-uniform
    #[arg(long, default_value = "amplitude-uniform")]
    velocity_measure: String,

    /// Spectrum estimator: amplitude | power
    #[arg(long, default_value = "amplitude")]
    spectrum: String,

    /// Upper edge of the fit window in cycles per time unit
    #[arg(long, default_value_t = 4.0)]
    fit_max: f64,

    /// Label rows with pressure: nh3 | nd3 | <impacts per cycle per bar>
    #[arg(long)]
    pressure_scale: Option<String>,

    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,

    /// Also write a two-panel SVG of nu0(p) and b(p)
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Sweep CSV produced by `inversion sweep`
    #[arg(long)]
    sweep: PathBuf,

    /// Experimental dataset CSV (pressure_bar,nu0_norm,b_norm)
    #[arg(long)]
    data: PathBuf,

    /// Pressure scaling: nh3 | nd3 | <impacts per cycle per bar>
    #[arg(long, default_value = "nh3")]
    scaling: String,

    #[arg(long, default_value = "compare.json")]
    out: PathBuf,

    /// Also write an overlay SVG
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct CoherenceArgs {
    #[arg(long, default_value = "nh3")]
    preset: String,

    /// Impacts per cycle
    #[arg(long, default_value_t = 7.5)]
    p: f64,

    #[arg(long)]
    ensemble: Option<usize>,

    #[arg(long)]
    cycles: Option<u32>,

    /// Window start in cycles (default: half the record)
    #[arg(long)]
    window_start: Option<f64>,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long, default_value = "coherence.json")]
    out: PathBuf,

    /// Also write an occupancy histogram SVG
    #[arg(long)]
    svg: Option<PathBuf>,
}

/// Defaults loadable from `--config`; explicit flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDefaults {
    pub seed: Option<u64>,
    pub cycles: Option<u32>,
    pub dt: Option<f64>,
    pub ensemble: Option<usize>,
    pub outdir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let json_errors = cli.json_errors;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if json_errors {
                let payload = serde_json::json!({ "error": format!("{err:#}") });
                eprintln!("{payload}");
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().ok();
    }

    let defaults: FileDefaults = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| anyhow::anyhow!("bad config {}: {e}", path.display()))?
        }
        None => FileDefaults::default(),
    };

    let outdir = cli
        .outdir
        .or_else(|| defaults.outdir.clone())
        .or_else(|| std::env::var_os("INVERSION_OUTDIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&outdir)?;

    match cli.command {
        Command::Trajectory(args) => commands::trajectory(args, &defaults, &outdir),
        Command::Sweep(args) => commands::sweep(args, &defaults, &outdir),
        Command::Compare(args) => commands::compare(args, &outdir),
        Command::Coherence(args) => commands::coherence(args, &defaults, &outdir),
    }
}
