//! Optimization-time scaling and step-size sweep experiments.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use mppi_core::config::{ConfigError, ControllerConfig, CostConfig, DmdMpcParams, DynamicsConfig, FieldError, ScenarioConfig, StepSize};
use mppi_core::costs::CircleTrackParams;
use mppi_core::engine::{EngineConfig, RolloutEngine, StrategyChoice};
use mppi_core::plant::{Plant, SimulatedSystem};
use serde::Serialize;

/// Sample counts of the timing experiment.
pub const TIMING_SAMPLES: [usize; 9] = [128, 256, 512, 1024, 2048, 4096, 6144, 8192, 16384];

pub const SWEEP_SAMPLES: [usize; 4] = [64, 256, 1024, 4096];
pub const SWEEP_GAMMAS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
pub const SWEEP_TRIALS: usize = 50;
pub const SWEEP_STEPS: usize = 1000;

/// Reported timing rows need at least this many trials.
pub const MIN_TIMING_TRIALS: usize = 30;

const WARMUP_SOLVES: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
}

impl From<mppi_core::Error> for BenchError {
    fn from(e: mppi_core::Error) -> Self {
        BenchError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        BenchError::Runtime(e.to_string())
    }
}

fn invalid(field: &str, message: String) -> BenchError {
    ConfigError::Invalid(vec![FieldError { field: field.into(), message }]).into()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRecord {
    pub samples: usize,
    pub method: String,
    pub strategy: String,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub trials: usize,
    /// Per-trial solve times, not written to CSV.
    #[serde(skip)]
    pub samples_ms: Vec<f64>,
}

impl TimingRecord {
    pub fn median_ms(&self) -> f64 {
        let mut v = self.samples_ms.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n == 0 {
            f64::NAN
        } else if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub samples: usize,
    pub gamma: f64,
    pub mean_cost: f64,
    pub std_cost: f64,
    pub mean_ms: f64,
    pub trials: usize,
}

/// The step size with the lowest mean cost for one sample count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArgminGamma {
    pub samples: usize,
    pub gamma: f64,
    pub mean_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub argmin: Vec<ArgminGamma>,
}

pub const TIMING_HEADER: [&str; 6] = ["samples", "method", "strategy", "mean_ms", "std_ms", "trials"];
pub const SWEEP_HEADER: [&str; 6] = ["samples", "gamma", "mean_cost", "std_cost", "mean_ms", "trials"];

/// Diff-drive navigation scenario with the default algorithm parameters.
pub fn timing_scenario() -> ScenarioConfig {
    ScenarioConfig::default()
}

/// Double integrator on the circle track, the step-size sweep scenario.
pub fn sweep_scenario() -> ScenarioConfig {
    ScenarioConfig {
        dt: 0.02,
        horizon: 20,
        num_samples: 1024,
        lambda: 1.0,
        control_std: vec![1.0, 1.0],
        initial_state: Some(vec![2.0, 0.0, 0.0, 2.0]),
        dynamics: DynamicsConfig::DoubleIntegrator,
        cost: CostConfig::CircleTrack(CircleTrackParams::default()),
        controller: ControllerConfig::Mppi,
        ..ScenarioConfig::default()
    }
}

/// Sample mean and (n - 1) standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn engine_for(base: &EngineConfig, strategy: StrategyChoice) -> Result<Arc<RolloutEngine>, BenchError> {
    Ok(Arc::new(RolloutEngine::new(EngineConfig { strategy, ..base.clone() })?))
}

/// Wall time of `compute_control` for each sample count and strategy.
/// Auto-tuning, sampler construction and warmup solves are not timed.
pub fn bench_timing(
    config: &ScenarioConfig,
    sample_counts: &[usize],
    trials: usize,
    strategies: &[StrategyChoice],
) -> Result<Vec<TimingRecord>, BenchError> {
    if trials < MIN_TIMING_TRIALS {
        return Err(invalid("trials", format!("at least {MIN_TIMING_TRIALS} are required, got {trials}")));
    }
    let mut out = Vec::new();
    for &m in sample_counts {
        let scenario = ScenarioConfig { num_samples: m, ..config.clone() };
        let errors = scenario.validate();
        if !errors.is_empty() {
            return Err(ConfigError::Invalid(errors).into());
        }
        let x0 = scenario.initial_state()?;
        for &choice in strategies {
            let engine = engine_for(&scenario.engine, choice)?;
            let mut controller = scenario.build_controller(engine.clone())?;
            // resolves auto-tuning before anything is timed
            for _ in 0..WARMUP_SOLVES {
                controller.compute_control(&x0)?;
            }
            let mut times = Vec::with_capacity(trials);
            for _ in 0..trials {
                let start = Instant::now();
                controller.compute_control(&x0)?;
                times.push(start.elapsed().as_secs_f64() * 1e3);
                controller.shift_control_sequence(scenario.dt, scenario.dt);
            }
            let strategy = match (choice, engine.selection()) {
                (StrategyChoice::Auto, Some(sel)) => format!("auto:{}", sel.strategy),
                (StrategyChoice::Split, _) => "split".into(),
                (StrategyChoice::Fused, _) => "fused".into(),
                (StrategyChoice::Auto, None) => "auto".into(),
            };
            let (mean_ms, std_ms) = mean_std(&times);
            out.push(TimingRecord {
                samples: m,
                method: controller.name().to_string(),
                strategy,
                mean_ms,
                std_ms,
                trials,
                samples_ms: times,
            });
        }
    }
    Ok(out)
}

/// Seed of trial `trial` in a run seeded with `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_add(trial as u64) & (i64::MAX as u64)
}

/// Result of one closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopRun {
    pub accumulated_cost: f64,
    pub mean_solve_ms: f64,
}

/// Runs `config`'s controller in closed loop for `steps` control steps,
/// replanning every step, on a shared engine.
pub fn closed_loop(config: &ScenarioConfig, engine: Arc<RolloutEngine>, steps: usize) -> Result<ClosedLoopRun, BenchError> {
    let controller = config.build_controller(engine)?;
    let plant = Plant::new(controller, config.plant_config())?;
    let mut sim = SimulatedSystem::new(config.build_dynamics(), config.initial_state()?)?;
    if config.plant.disturbance_std > 0.0 {
        sim = sim.with_disturbance(config.plant.disturbance_std as f32, config.rng_seed)?;
    }
    let log = plant.run_control_steps(&mut sim, steps)?;
    Ok(ClosedLoopRun {
        accumulated_cost: log.accumulated_cost,
        mean_solve_ms: if log.solves > 0 { log.solve_ms / log.solves as f64 } else { 0.0 },
    })
}

/// Step-size variant of `base` with `num_samples` samples and seed `seed`.
pub fn sweep_config(base: &ScenarioConfig, samples: usize, gamma: f64, seed: u64) -> ScenarioConfig {
    let controller = if gamma == 1.0 {
        ControllerConfig::Mppi
    } else {
        ControllerConfig::DmdMpc(DmdMpcParams { step_size: StepSize::Constant(gamma) })
    };
    let mut c = ScenarioConfig { num_samples: samples, rng_seed: seed, controller, ..base.clone() };
    c.plant.replan_rate = 1.0 / base.dt;
    c
}

/// Closed-loop accumulated cost over a grid of step sizes and sample
/// counts, `trials` seeds per cell.
pub fn bench_dmd_sweep(
    base: &ScenarioConfig,
    gammas: &[f64],
    sample_counts: &[usize],
    steps: usize,
    trials: usize,
    seed: u64,
) -> Result<SweepOutput, BenchError> {
    bench_dmd_sweep_with(base, gammas, sample_counts, steps, trials, seed, |_, _| {})
}

/// As [`bench_dmd_sweep`], calling `progress` after each finished cell.
pub fn bench_dmd_sweep_with(
    base: &ScenarioConfig,
    gammas: &[f64],
    sample_counts: &[usize],
    steps: usize,
    trials: usize,
    seed: u64,
    mut progress: impl FnMut(&SweepRecord, usize),
) -> Result<SweepOutput, BenchError> {
    if gammas.is_empty() || sample_counts.is_empty() {
        let field = if gammas.is_empty() { "gammas" } else { "samples" };
        return Err(invalid(field, "must be non-empty".into()));
    }
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1".into()));
    }
    if steps == 0 {
        return Err(invalid("steps", "must be at least 1".into()));
    }
    let errors = sweep_config(base, sample_counts[0], gammas[0], seed).validate();
    if !errors.is_empty() {
        return Err(ConfigError::Invalid(errors).into());
    }
    let engine = base.build_engine()?;
    let mut records = Vec::new();
    let mut argmin = Vec::new();
    let total = gammas.len() * sample_counts.len();
    for &m in sample_counts {
        let mut best: Option<ArgminGamma> = None;
        for &gamma in gammas {
            let mut costs = Vec::with_capacity(trials);
            let mut ms = Vec::with_capacity(trials);
            for trial in 0..trials {
                let config = sweep_config(base, m, gamma, trial_seed(seed, trial));
                let run = closed_loop(&config, engine.clone(), steps)?;
                costs.push(run.accumulated_cost);
                ms.push(run.mean_solve_ms);
            }
            let (mean_cost, std_cost) = mean_std(&costs);
            let record = SweepRecord { samples: m, gamma, mean_cost, std_cost, mean_ms: mean_std(&ms).0, trials };
            if best.is_none_or(|b| mean_cost < b.mean_cost) {
                best = Some(ArgminGamma { samples: m, gamma, mean_cost });
            }
            records.push(record);
            progress(records.last().unwrap(), total);
        }
        argmin.extend(best);
    }
    Ok(SweepOutput { records, argmin })
}

/// Writes `records` under `header`; an empty list gives a header-only file.
pub fn emit_csv<T: Serialize>(records: &[T], header: &[&str], path: impl AsRef<Path>) -> Result<(), BenchError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path)
        .map_err(|e| BenchError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    write_csv(records, header, file)
}

pub fn write_csv<T: Serialize>(records: &[T], header: &[&str], out: impl std::io::Write) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| BenchError::Runtime(e.to_string()))?;
    Ok(())
}

pub fn timing_csv(records: &[TimingRecord]) -> Result<String, BenchError> {
    let mut buf = Vec::new();
    write_csv(records, &TIMING_HEADER, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn sweep_csv(records: &[SweepRecord]) -> Result<String, BenchError> {
    let mut buf = Vec::new();
    write_csv(records, &SWEEP_HEADER, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
