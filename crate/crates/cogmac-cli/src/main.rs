//! Experiment runner: sweeps a scenario parameter, cross-validates the closed
//! forms against Monte Carlo, and emits reproducible CSV datasets.
//!
//! Sweep points are evaluated from a seeded, counter-based sample stream, so a
//! given `(scenario, sweep, samples, seed)` always reproduces the same bytes.
//! `RAYON_NUM_THREADS` controls the worker count only; it never changes
//! results.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cogmac::experiment::{
    cmd_allocate, cmd_bounds, cmd_outage, cmd_slope, BoundsRegime, CsvDataset, ExperimentKind,
    ExperimentSpec, SweepAxis,
};
use cogmac::outage::{baseline_outage, coexistence_feasible};
use cogmac::power::{power_limits, CsiMode};
use cogmac::scenario::load_scenario;

#[derive(Parser)]
#[command(name = "cogmac", version, about = "Cognitive multiple-access experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (JSON)
    #[arg(long)]
    scenario: PathBuf,
    /// Sweep expression: <param>=<start>:<stop>:<step><db|lin>
    #[arg(long)]
    sweep: String,
    /// Monte Carlo samples per row
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Base seed; row i uses seed + i
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Primary outage vs the primary-to-interference SNR ratio, closed form
    /// against Monte Carlo (sweep param: snr_ratio)
    Outage(CommonArgs),
    /// Ergodic-rate bounds vs per-user transmit SNR (sweep param: snr_s)
    Bounds {
        #[command(flatten)]
        common: CommonArgs,
        /// Interference setting: strong (decoded and removed) or weak
        /// (treated as noise)
        #[arg(long, default_value = "strong")]
        regime: String,
    },
    /// Outage-constrained power allocation vs primary SNR (sweep param: snr_p)
    Allocate(CommonArgs),
    /// High-SNR slope of the allocation objective; the sweep must cover
    /// [40, 60] dB (sweep param: snr_p)
    Slope(CommonArgs),
    /// Validate a scenario file and print its derived quantities
    Validate {
        /// Scenario file (JSON)
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Outage(common) => {
            let spec = build_spec(ExperimentKind::OutageSweep, &common, BoundsRegime::Strong)?;
            let ds = cmd_outage(&spec).map_err(|e| e.to_string())?;
            emit(&ds, &common.out)
        }
        Command::Bounds { common, regime } => {
            let regime = match regime.as_str() {
                "strong" => BoundsRegime::Strong,
                "weak" => BoundsRegime::Weak,
                other => return Err(format!("unknown regime `{other}` (use strong|weak)")),
            };
            let spec = build_spec(ExperimentKind::BoundsSweep, &common, regime)?;
            let ds = cmd_bounds(&spec).map_err(|e| e.to_string())?;
            emit(&ds, &common.out)
        }
        Command::Allocate(common) => {
            let spec = build_spec(ExperimentKind::AllocationSweep, &common, BoundsRegime::Strong)?;
            let ds = cmd_allocate(&spec).map_err(|e| e.to_string())?;
            emit(&ds, &common.out)
        }
        Command::Slope(common) => {
            let spec = build_spec(ExperimentKind::SlopeFit, &common, BoundsRegime::Strong)?;
            let (ds, slope) = cmd_slope(&spec).map_err(|e| e.to_string())?;
            emit(&ds, &common.out)?;
            eprintln!("slope = {slope}");
            Ok(())
        }
        Command::Validate { scenario } => validate(&scenario),
    }
}

fn build_spec(
    kind: ExperimentKind,
    common: &CommonArgs,
    regime: BoundsRegime,
) -> Result<ExperimentSpec, String> {
    let sweep = SweepAxis::parse(&common.sweep).map_err(|e| e.to_string())?;
    Ok(ExperimentSpec {
        kind,
        scenario_path: common.scenario.display().to_string(),
        sweep,
        samples: common.samples,
        seed: common.seed,
        regime,
    })
}

fn emit(ds: &CsvDataset, out: &Option<PathBuf>) -> Result<(), String> {
    let text = ds.to_csv_string();
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| format!("cannot write `{}`: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn validate(path: &PathBuf) -> Result<(), String> {
    let s = load_scenario(path).map_err(|e| e.to_string())?;
    let d = s.derive_constants();
    let rho0 = baseline_outage(&s);
    println!("scenario: {}", path.display());
    println!("users: {}", s.k());
    println!("snr_p_linear: {}", s.snr_p());
    println!("gamma_th: {}", d.gamma_th);
    println!("zeta: {}", d.zeta);
    println!("rho_0: {rho0}");
    println!("outage_margin: {}", s.outage_margin);
    if coexistence_feasible(&s) {
        let (p_min, p_max) = power_limits(&s, CsiMode::Statistical).map_err(|e| e.to_string())?;
        println!("coexistence: feasible");
        println!("pivot_p_min: {p_min}");
        println!("pivot_p_max: {p_max}");
    } else {
        println!("coexistence: infeasible (secondary must stay silent)");
    }
    Ok(())
}
