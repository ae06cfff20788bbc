//! Sampling-based optimizers built on the rollout engine.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::costs::CostFunction;
use crate::dynamics::Dynamics;
use crate::engine::{rollout_nominal, RolloutEngine, RolloutRequest, RolloutResult, WeightResult};
use crate::error::{Error, Result};
use crate::sampling::{NoiseBatch, SamplingDistribution};
use crate::types::{ControlTrajectory, ModelDims, OutputTrajectory, StateVector};

mod cem;
mod mppi;
mod tube;

pub use cem::{elite_weights, CemController};
pub use mppi::MppiController;
pub use tube::{TubeMppiController, TubeSolution};

/// What fills the vacated tail after a control-sequence shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailFill {
    #[default]
    RepeatLast,
    Zero,
}

/// Parameters shared by every sampling controller.
#[derive(Debug, Clone, PartialEq)]
pub struct MppiConfig {
    pub num_samples: usize,
    pub iterations: usize,
    pub lambda: f32,
    pub dt: f32,
    pub horizon: usize,
    pub tail_fill: TailFill,
}

impl MppiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_samples == 0 {
            return Err(Error::invalid("num_samples", "must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", "must be at least 1"));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::invalid("lambda", format!("must be positive, got {}", self.lambda)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon", "must be at least 1"));
        }
        Ok(())
    }
}

/// A solved plan: the optimal control sequence and the nominal trajectory
/// obtained by rolling it through the model.
#[derive(Debug, Clone)]
pub struct ControllerSolution {
    pub controls: ControlTrajectory,
    /// `T + 1` states, starting with the state the solve started from.
    pub states: Vec<StateVector>,
    pub outputs: OutputTrajectory,
    /// Cost of the nominal trajectory.
    pub cost: f64,
    /// Weights from the final iteration.
    pub weights: WeightResult,
    pub solve_ms: f64,
}

impl ControllerSolution {
    /// Equality of everything except wall time.
    pub fn same_plan(&self, other: &Self) -> bool {
        self.controls == other.controls
            && self.states == other.states
            && self.outputs == other.outputs
            && self.cost == other.cost
            && self.weights == other.weights
    }
}

/// A receding-horizon optimizer.
pub trait Controller: Send {
    fn name(&self) -> &str;

    fn dynamics(&self) -> &Arc<dyn Dynamics>;

    fn cost(&self) -> &Arc<dyn CostFunction>;

    fn dims(&self) -> ModelDims {
        self.dynamics().dims()
    }

    fn dt(&self) -> f32;

    fn horizon(&self) -> usize;

    /// Optimizes from `x0`, warm-started from the current mean.
    fn compute_control(&mut self, x0: &StateVector) -> Result<ControllerSolution>;

    /// Advances the mean by `elapsed` rounded to a multiple of `dt_min`,
    /// quantized to whole control steps. Returns the number of steps shifted.
    fn shift_control_sequence(&mut self, elapsed: f64, dt_min: f64) -> usize;

    fn control_sequence(&self) -> &ControlTrajectory;

    fn set_control_sequence(&mut self, controls: ControlTrajectory) -> Result<()>;
}

impl<C: Controller + ?Sized> Controller for Box<C> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn dynamics(&self) -> &Arc<dyn Dynamics> {
        (**self).dynamics()
    }

    fn cost(&self) -> &Arc<dyn CostFunction> {
        (**self).cost()
    }

    fn dt(&self) -> f32 {
        (**self).dt()
    }

    fn horizon(&self) -> usize {
        (**self).horizon()
    }

    fn compute_control(&mut self, x0: &StateVector) -> Result<ControllerSolution> {
        (**self).compute_control(x0)
    }

    fn shift_control_sequence(&mut self, elapsed: f64, dt_min: f64) -> usize {
        (**self).shift_control_sequence(elapsed, dt_min)
    }

    fn control_sequence(&self) -> &ControlTrajectory {
        (**self).control_sequence()
    }

    fn set_control_sequence(&mut self, controls: ControlTrajectory) -> Result<()> {
        (**self).set_control_sequence(controls)
    }
}

/// Whole control steps covered by `elapsed`, after rounding it to the
/// nearest multiple of `dt_min` (ties to even).
pub fn shift_steps(elapsed: f64, dt_min: f64, dt: f64) -> usize {
    if !(elapsed > 0.0) || !(dt_min > 0.0) {
        return 0;
    }
    let quantized = (elapsed / dt_min).round_ties_even() * dt_min;
    (quantized / dt + 1e-9).floor() as usize
}

/// Shifts `mean` forward by `steps`, filling the tail per `fill`. A shift
/// of at least the horizon resets the mean to zero.
pub fn shift_trajectory(mean: &ControlTrajectory, steps: usize, fill: TailFill) -> ControlTrajectory {
    let horizon = mean.horizon();
    let n_u = mean.n_u();
    if steps == 0 {
        return mean.clone();
    }
    if steps >= horizon {
        return ControlTrajectory::from_parts_unchecked(mean.dt(), n_u, vec![0.0; horizon * n_u]);
    }
    let src = mean.as_slice();
    let mut out = src[steps * n_u..].to_vec();
    let last = &src[(horizon - 1) * n_u..];
    for _ in 0..steps {
        match fill {
            TailFill::RepeatLast => out.extend_from_slice(last),
            TailFill::Zero => out.extend(std::iter::repeat(0.0).take(n_u)),
        }
    }
    ControlTrajectory::from_parts_unchecked(mean.dt(), n_u, out)
}

/// State shared by the concrete controllers: model, cost, sampler, engine
/// handle and the warm-start mean.
pub struct ControllerCore {
    pub(crate) dynamics: Arc<dyn Dynamics>,
    pub(crate) cost: Arc<dyn CostFunction>,
    pub(crate) sampler: Arc<dyn SamplingDistribution>,
    pub(crate) engine: Arc<RolloutEngine>,
    pub(crate) config: MppiConfig,
    pub(crate) mean: ControlTrajectory,
    draws: u64,
}

impl ControllerCore {
    pub fn new(
        dynamics: Arc<dyn Dynamics>,
        cost: Arc<dyn CostFunction>,
        sampler: Arc<dyn SamplingDistribution>,
        engine: Arc<RolloutEngine>,
        config: MppiConfig,
    ) -> Result<Self> {
        config.validate()?;
        let dims = dynamics.dims();
        if let Some(n_y) = cost.output_dim() {
            if n_y != dims.n_y {
                return Err(Error::DimensionMismatch { what: "cost output", expected: dims.n_y, actual: n_y });
            }
        }
        let mean = ControlTrajectory::zeros(config.dt, config.horizon, dims.n_u)?;
        Ok(Self { dynamics, cost, sampler, engine, config, mean, draws: 0 })
    }

    pub fn config(&self) -> &MppiConfig {
        &self.config
    }

    pub fn engine(&self) -> &Arc<RolloutEngine> {
        &self.engine
    }

    /// Draws a fresh noise batch about `mean`; every call uses a new draw
    /// index, so the sequence of batches is fixed by the sampler seed.
    pub(crate) fn draw(&mut self, mean: &ControlTrajectory) -> Result<NoiseBatch> {
        let draw = self.draws;
        self.draws += 1;
        let sampler = &self.sampler;
        let m = self.config.num_samples;
        self.engine.install(|| sampler.generate_samples(mean, m, draw))
    }

    pub(crate) fn evaluate(
        &self,
        initial_states: &[StateVector],
        means: &[ControlTrajectory],
        noise: &NoiseBatch,
    ) -> Result<RolloutResult> {
        let req = RolloutRequest {
            initial_states,
            means,
            noise,
            dynamics: self.dynamics.as_ref(),
            cost: self.cost.as_ref(),
            lambda: self.config.lambda,
            importance_sampling: self.sampler.importance_sampling(),
        };
        self.engine.rollout(&req)
    }

    pub(crate) fn solution(
        &self,
        x0: &StateVector,
        controls: ControlTrajectory,
        weights: WeightResult,
        solve_ms: f64,
    ) -> Result<ControllerSolution> {
        let (states, outputs, cost) = rollout_nominal(self.dynamics.as_ref(), self.cost.as_ref(), x0, &controls)?;
        Ok(ControllerSolution { controls, states, outputs, cost, weights, solve_ms })
    }

    pub(crate) fn check_state(&self, x0: &StateVector) -> Result<()> {
        x0.expect_dim(self.dynamics.dims().n_x)
    }

    pub(crate) fn set_mean(&mut self, controls: ControlTrajectory) -> Result<()> {
        if controls.n_u() != self.mean.n_u() || controls.horizon() != self.mean.horizon() {
            return Err(Error::DimensionMismatch {
                what: "control sequence (horizon x n_u)",
                expected: self.mean.horizon() * self.mean.n_u(),
                actual: controls.horizon() * controls.n_u(),
            });
        }
        self.mean = controls;
        Ok(())
    }

    pub(crate) fn shift(&mut self, elapsed: f64, dt_min: f64) -> usize {
        let steps = shift_steps(elapsed, dt_min, self.config.dt as f64);
        self.mean = shift_trajectory(&self.mean, steps, self.config.tail_fill);
        steps
    }
}

macro_rules! delegate_core {
    () => {
        fn dynamics(&self) -> &std::sync::Arc<dyn crate::dynamics::Dynamics> {
            &self.core.dynamics
        }

        fn cost(&self) -> &std::sync::Arc<dyn crate::costs::CostFunction> {
            &self.core.cost
        }

        fn dt(&self) -> f32 {
            self.core.config.dt
        }

        fn horizon(&self) -> usize {
            self.core.config.horizon
        }

        fn control_sequence(&self) -> &crate::types::ControlTrajectory {
            &self.core.mean
        }

        fn set_control_sequence(&mut self, controls: crate::types::ControlTrajectory) -> crate::error::Result<()> {
            self.core.set_mean(controls)
        }
    };
}
pub(crate) use delegate_core;
