use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mppi_bench::*;
use mppi_core::config::{load_scenario, ScenarioConfig};
use mppi_core::engine::StrategyChoice;

#[derive(Parser)]
#[command(name = "mppi-bench", version, about = "Solve-time scaling and DMD-MPC step-size sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean solve time per sample count and rollout strategy.
    Timing(Common),
    /// Closed-loop accumulated cost over a step-size by sample-count grid.
    DmdSweep(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario TOML; defaults to the built-in scenario of the experiment.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated sample counts.
    #[arg(long, value_delimiter = ',')]
    samples: Option<Vec<usize>>,
    /// Comma-separated step sizes (dmd-sweep only).
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    /// Closed-loop steps per trial (dmd-sweep only).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Engine worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    strategy: Option<StrategyChoice>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn scenario(&self, default: fn() -> ScenarioConfig) -> Result<ScenarioConfig, BenchError> {
        let mut config = match &self.config {
            Some(path) => load_scenario(path)?,
            None => default(),
        };
        if let Some(w) = self.workers {
            config.engine.workers = w;
        }
        if let Some(s) = self.seed {
            config.rng_seed = s;
        }
        Ok(config)
    }

    fn write(&self, csv: String) -> Result<(), BenchError> {
        match &self.out {
            Some(path) => std::fs::write(path, csv)
                .map_err(|e| BenchError::Runtime(format!("cannot write {}: {e}", path.display()))),
            None => {
                print!("{csv}");
                Ok(())
            }
        }
    }
}

fn timing(args: &Common) -> Result<(), BenchError> {
    let config = args.scenario(timing_scenario)?;
    let samples = args.samples.clone().unwrap_or_else(|| TIMING_SAMPLES.to_vec());
    let strategies = match args.strategy {
        Some(s) => vec![s],
        None => vec![StrategyChoice::Split, StrategyChoice::Fused, StrategyChoice::Auto],
    };
    let records = bench_timing(&config, &samples, args.trials.unwrap_or(MIN_TIMING_TRIALS), &strategies)?;
    args.write(timing_csv(&records)?)
}

fn sweep(args: &Common) -> Result<(), BenchError> {
    let mut config = args.scenario(sweep_scenario)?;
    if let Some(s) = args.strategy {
        config.engine.strategy = s;
    }
    let samples = args.samples.clone().unwrap_or_else(|| SWEEP_SAMPLES.to_vec());
    let gammas = args.gammas.clone().unwrap_or_else(|| SWEEP_GAMMAS.to_vec());
    let out = bench_dmd_sweep_with(
        &config,
        &gammas,
        &samples,
        args.steps.unwrap_or(SWEEP_STEPS),
        args.trials.unwrap_or(SWEEP_TRIALS),
        config.rng_seed,
        |r, total| eprintln!("M={} gamma={} mean_cost={:.3} ({total} cells)", r.samples, r.gamma, r.mean_cost),
    )?;
    for a in &out.argmin {
        eprintln!("argmin M={}: gamma={} (mean cost {:.3})", a.samples, a.gamma, a.mean_cost);
    }
    args.write(sweep_csv(&out.records)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Timing(args) => timing(args),
        Command::DmdSweep(args) => sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                BenchError::Config(_) => ExitCode::from(2),
                BenchError::Runtime(_) => ExitCode::from(3),
            }
        }
    }
}
