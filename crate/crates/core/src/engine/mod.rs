//! Data-parallel rollout evaluation for `M` samples of one or two systems.
//!
//! Two evaluation strategies are available:
//!
//! * **Split**: propagate all samples through the dynamics first, storing
//!   every output, then evaluate running costs in parallel over
//!   `(sample, timestep)` and reduce per sample.
//! * **Fused**: each `(system, sample)` worker runs step then cost in one
//!   sequential pass without storing trajectories.
//!
//! [`StrategyChoice::Auto`] times both on the first request and keeps the
//! faster one.

use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::costs::CostFunction;
use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::sampling::{fraction_count, NoiseBatch};
use crate::types::{ControlTrajectory, OutputTrajectory, StateVector};

mod rollout;
mod weights;

pub use weights::{compute_weights, weighted_perturbation, weighted_update, WeightResult};
pub(crate) use weights::apply_step;

/// A concrete evaluation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Split,
    Fused,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Split => "split",
            Strategy::Fused => "fused",
        })
    }
}

/// Requested strategy; `Auto` is resolved by timing both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyChoice {
    Split,
    Fused,
    #[default]
    Auto,
}

impl std::str::FromStr for StrategyChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "split" => Ok(Self::Split),
            "fused" => Ok(Self::Fused),
            "auto" => Ok(Self::Auto),
            other => Err(format!("unknown strategy `{other}` (expected split, fused or auto)")),
        }
    }
}

/// Median wall time per strategy from an auto-tune run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingRecord {
    pub split_median_ms: f64,
    pub fused_median_ms: f64,
    pub trials: usize,
}

/// The outcome of strategy resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategySelection {
    pub strategy: Strategy,
    /// Present when the choice came from timing both strategies.
    pub timings: Option<TimingRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub strategy: StrategyChoice,
    /// Timed trials per strategy when auto-tuning (at least 3 are run).
    pub autotune_trials: usize,
    /// Fraction of fused-strategy sample trajectories kept for export.
    pub retain_fraction: f64,
    /// Per-worker scratch budget for the fused strategy; requests needing
    /// more fall back to split.
    pub fused_scratch_budget_bytes: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            workers: 0,
            strategy: StrategyChoice::Auto,
            autotune_trials: 5,
            retain_fraction: 0.0,
            fused_scratch_budget_bytes: 48 * 1024,
        }
    }
}

/// Everything one batch of rollouts needs. `initial_states` and `means`
/// hold one entry per system; all systems share the noise batch.
#[derive(Clone, Copy)]
pub struct RolloutRequest<'a> {
    pub initial_states: &'a [StateVector],
    pub means: &'a [ControlTrajectory],
    pub noise: &'a NoiseBatch,
    pub dynamics: &'a dyn Dynamics,
    pub cost: &'a dyn CostFunction,
    pub lambda: f32,
    pub importance_sampling: bool,
}

impl RolloutRequest<'_> {
    pub fn validate(&self) -> Result<()> {
        let s = self.initial_states.len();
        if !(1..=2).contains(&s) {
            return Err(Error::invalid("initial_states", format!("1 or 2 systems supported, got {s}")));
        }
        if self.means.len() != s {
            return Err(Error::DimensionMismatch { what: "means", expected: s, actual: self.means.len() });
        }
        if !(self.lambda > 0.0) {
            return Err(Error::invalid("lambda", format!("must be positive, got {}", self.lambda)));
        }
        let dims = self.dynamics.dims();
        for x in self.initial_states {
            x.expect_dim(dims.n_x)?;
        }
        for u in self.means {
            if u.n_u() != dims.n_u || u.horizon() != self.noise.horizon() {
                return Err(Error::DimensionMismatch {
                    what: "mean control trajectory (horizon x n_u)",
                    expected: self.noise.horizon() * dims.n_u,
                    actual: u.horizon() * u.n_u(),
                });
            }
        }
        if self.noise.n_u() != dims.n_u {
            return Err(Error::DimensionMismatch { what: "noise n_u", expected: dims.n_u, actual: self.noise.n_u() });
        }
        if let Some(n_y) = self.cost.output_dim() {
            if n_y != dims.n_y {
                return Err(Error::DimensionMismatch { what: "cost output", expected: dims.n_y, actual: n_y });
            }
        }
        Ok(())
    }

    /// Per-worker scratch the fused strategy needs, in bytes.
    pub fn fused_scratch_bytes(&self) -> usize {
        let d = self.dynamics.dims();
        std::mem::size_of::<f32>() * (2 * d.n_x + 2 * d.n_u + d.n_y) + std::mem::size_of::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Retained {
    fraction: f64,
    /// Per system: sample indices sorted by cost, with their outputs.
    by_system: Vec<Vec<(usize, Vec<f32>)>>,
}

/// Per-sample costs for every system, plus stored output trajectories when
/// the strategy keeps them.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    strategy: Strategy,
    num_systems: usize,
    num_samples: usize,
    horizon: usize,
    n_y: usize,
    costs: Vec<f64>,
    outputs: Option<Vec<f32>>,
    retained: Option<Retained>,
}

impl RolloutResult {
    fn new(
        strategy: Strategy,
        num_systems: usize,
        num_samples: usize,
        horizon: usize,
        n_y: usize,
        costs: Vec<f64>,
        outputs: Option<Vec<f32>>,
    ) -> Self {
        Self { strategy, num_systems, num_samples, horizon, n_y, costs, outputs, retained: None }
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn num_systems(&self) -> usize {
        self.num_systems
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    /// Total costs `J^m` of one system, including terminal and
    /// importance-sampling terms.
    pub fn costs(&self, system: usize) -> &[f64] {
        &self.costs[system * self.num_samples..(system + 1) * self.num_samples]
    }

    /// All stored outputs, shaped `(S, M, T, n_y)`, if the strategy kept them.
    pub fn outputs(&self) -> Option<&[f32]> {
        self.outputs.as_deref()
    }

    fn order_by_cost(&self, system: usize) -> Vec<usize> {
        let costs = self.costs(system);
        let mut idx: Vec<usize> = (0..self.num_samples).collect();
        idx.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
        idx
    }

    /// The `ceil(fraction * M)` lowest-cost sample trajectories of system 0.
    pub fn export_sample_trajectories(&self, fraction: f64) -> Result<Vec<OutputTrajectory>> {
        self.export_system_trajectories(0, fraction)
    }

    pub fn export_system_trajectories(&self, system: usize, fraction: f64) -> Result<Vec<OutputTrajectory>> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::invalid("fraction", format!("must lie in [0, 1], got {fraction}")));
        }
        if system >= self.num_systems {
            return Err(Error::OutOfRange { what: "system", index: system, limit: self.num_systems });
        }
        let k = fraction_count(fraction, self.num_samples);
        if k == 0 {
            return Ok(Vec::new());
        }
        let len = self.horizon * self.n_y;
        if let Some(outputs) = &self.outputs {
            return Ok(self
                .order_by_cost(system)
                .into_iter()
                .take(k)
                .map(|m| {
                    let base = (system * self.num_samples + m) * len;
                    OutputTrajectory::from_parts_unchecked(self.n_y, outputs[base..base + len].to_vec())
                })
                .collect());
        }
        match &self.retained {
            Some(r) if k <= r.by_system[system].len() => Ok(r.by_system[system][..k]
                .iter()
                .map(|(_, y)| OutputTrajectory::from_parts_unchecked(self.n_y, y.clone()))
                .collect()),
            Some(r) => Err(Error::TrajectoriesNotRetained { retained: r.fraction, requested: fraction }),
            None => Err(Error::TrajectoriesNotRetained { retained: 0.0, requested: fraction }),
        }
    }
}

/// Source of timestamps in milliseconds for auto-tuning.
pub trait Clock {
    fn now_ms(&mut self) -> f64;
}

/// Monotonic wall clock.
#[derive(Debug)]
pub struct WallClock(Instant);

impl Default for WallClock {
    fn default() -> Self {
        Self(Instant::now())
    }
}

impl Clock for WallClock {
    fn now_ms(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Picks the strategy with the lower median; ties go to split.
pub fn select_by_medians(split_ms: &[f64], fused_ms: &[f64]) -> Strategy {
    if median(fused_ms) < median(split_ms) {
        Strategy::Fused
    } else {
        Strategy::Split
    }
}

const WARMUP_RUNS: usize = 2;

/// Owns the worker pool and the resolved strategy. Shareable between
/// controllers; rollouts from different threads queue on the same pool.
pub struct RolloutEngine {
    pool: rayon::ThreadPool,
    config: EngineConfig,
    selection: Mutex<Option<StrategySelection>>,
}

fn forced(choice: StrategyChoice) -> Option<StrategySelection> {
    match choice {
        StrategyChoice::Split => Some(StrategySelection { strategy: Strategy::Split, timings: None }),
        StrategyChoice::Fused => Some(StrategySelection { strategy: Strategy::Fused, timings: None }),
        StrategyChoice::Auto => None,
    }
}

impl RolloutEngine {
    pub fn new(config: EngineConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&config.retain_fraction) {
            return Err(Error::invalid("retain_fraction", "must lie in [0, 1]"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?;
        let selection = Mutex::new(forced(config.strategy));
        Ok(Self { pool, config, selection })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// The resolved strategy, if `Auto` has run or a strategy was forced.
    pub fn selection(&self) -> Option<StrategySelection> {
        *self.selection.lock().unwrap()
    }

    /// Forces a strategy (or re-arms auto-tuning with `Auto`).
    pub fn set_strategy(&self, choice: StrategyChoice) {
        *self.selection.lock().unwrap() = forced(choice);
    }

    /// Resolves `Auto` on `req` now, if it is still unresolved.
    pub fn resolve(&self, req: &RolloutRequest<'_>) -> Result<StrategySelection> {
        let mut guard = self.selection.lock().unwrap();
        match *guard {
            Some(s) => Ok(s),
            None => {
                let s = self.auto_select_strategy(req, self.config.autotune_trials)?;
                *guard = Some(s);
                Ok(s)
            }
        }
    }

    /// Runs `f` inside the engine's worker pool.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    pub fn rollout_split(&self, req: &RolloutRequest<'_>) -> Result<RolloutResult> {
        req.validate()?;
        self.pool.install(|| rollout::split(req))
    }

    pub fn rollout_fused(&self, req: &RolloutRequest<'_>) -> Result<RolloutResult> {
        req.validate()?;
        let mut result = self.pool.install(|| rollout::fused(req))?;
        if self.config.retain_fraction > 0.0 {
            let k = fraction_count(self.config.retain_fraction, result.num_samples);
            let by_system = (0..result.num_systems)
                .map(|sys| {
                    result
                        .order_by_cost(sys)
                        .into_iter()
                        .take(k)
                        .map(|m| Ok((m, rollout::replay(req, sys, m)?)))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            result.retained = Some(Retained { fraction: self.config.retain_fraction, by_system });
        }
        Ok(result)
    }

    fn run(&self, strategy: Strategy, req: &RolloutRequest<'_>) -> Result<RolloutResult> {
        match strategy {
            Strategy::Split => self.rollout_split(req),
            Strategy::Fused => self.rollout_fused(req),
        }
    }

    /// Strategy a request would run with, honoring the fused scratch budget.
    fn effective(&self, strategy: Strategy, req: &RolloutRequest<'_>) -> Strategy {
        if strategy == Strategy::Fused && req.fused_scratch_bytes() > self.config.fused_scratch_budget_bytes {
            Strategy::Split
        } else {
            strategy
        }
    }

    /// Evaluates a request with the configured strategy, auto-tuning first
    /// if the choice is still unresolved.
    pub fn rollout(&self, req: &RolloutRequest<'_>) -> Result<RolloutResult> {
        let selection = self.resolve(req)?;
        self.run(self.effective(selection.strategy, req), req)
    }

    /// Times both strategies on `req` (2 warmup runs, then `max(3, trials)`
    /// timed runs each) and returns the one with the lower median.
    pub fn auto_select_strategy(&self, req: &RolloutRequest<'_>, trials: usize) -> Result<StrategySelection> {
        self.auto_select_with_clock(req, trials, &mut WallClock::default())
    }

    pub fn auto_select_with_clock(
        &self,
        req: &RolloutRequest<'_>,
        trials: usize,
        clock: &mut dyn Clock,
    ) -> Result<StrategySelection> {
        if self.effective(Strategy::Fused, req) == Strategy::Split {
            return Ok(StrategySelection { strategy: Strategy::Split, timings: None });
        }
        let trials = trials.max(3);
        let mut time = |strategy: Strategy| -> Result<Vec<f64>> {
            for _ in 0..WARMUP_RUNS {
                self.run(strategy, req)?;
            }
            (0..trials)
                .map(|_| {
                    let start = clock.now_ms();
                    self.run(strategy, req)?;
                    Ok(clock.now_ms() - start)
                })
                .collect()
        };
        let split_ms = time(Strategy::Split)?;
        let fused_ms = time(Strategy::Fused)?;
        Ok(StrategySelection {
            strategy: select_by_medians(&split_ms, &fused_ms),
            timings: Some(TimingRecord {
                split_median_ms: median(&split_ms),
                fused_median_ms: median(&fused_ms),
                trials,
            }),
        })
    }
}

/// Rolls `controls` through `dynamics` from `x0`, returning the `T + 1`
/// visited states (starting with `x0`), the `T` outputs, and the trajectory
/// cost under `cost`.
pub fn rollout_nominal(
    dynamics: &dyn Dynamics,
    cost: &dyn CostFunction,
    x0: &StateVector,
    controls: &ControlTrajectory,
) -> Result<(Vec<StateVector>, OutputTrajectory, f64)> {
    let d = dynamics.dims();
    x0.expect_dim(d.n_x)?;
    let mut x = x0.as_slice().to_vec();
    let mut u = vec![0.0; d.n_u];
    let mut xdot = vec![0.0; d.n_x];
    let mut y = vec![0.0; d.n_y];
    let mut states = Vec::with_capacity(controls.horizon() + 1);
    states.push(x0.clone());
    let mut outputs = Vec::with_capacity(controls.horizon() * d.n_y);
    let mut total = 0.0f64;
    for t in 0..controls.horizon() {
        u.copy_from_slice(controls.at(t));
        dynamics.step_into(&mut x, &mut u, controls.dt(), &mut xdot, &mut y);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::RolloutDiverged { quantity: "state", system: 0, sample: 0, timestep: t });
        }
        total += cost.running_cost(&y, controls.at(t), t) as f64;
        states.push(StateVector::from_vec_unchecked(x.clone()));
        outputs.extend_from_slice(&y);
    }
    total += cost.terminal_cost(&y) as f64;
    Ok((states, OutputTrajectory::from_parts_unchecked(d.n_y, outputs), total))
}
