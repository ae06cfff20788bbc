use std::time::Instant;

use super::{delegate_core, Controller, ControllerCore, ControllerSolution};
use crate::engine::{apply_step, compute_weights, weighted_perturbation};
use crate::error::{Error, Result};
use crate::types::StateVector;

/// MPPI with an optional mirror-descent step size.
///
/// Each iteration draws fresh noise about the current mean, evaluates it,
/// and moves the mean by `gamma_t * sum_m w_m eps^m_t`. With `gamma = 1`
/// everywhere this is the plain MPPI update; smaller steps blend the new
/// estimate with the previous mean, `(1 - gamma) U_old + gamma U_mppi`.
pub struct MppiController {
    core: ControllerCore,
    step_size: Vec<f32>,
}

impl MppiController {
    pub fn new(core: ControllerCore) -> Self {
        Self { core, step_size: vec![1.0] }
    }

    /// Step-size variant with a constant `gamma`.
    pub fn with_step_size(core: ControllerCore, gamma: f32) -> Result<Self> {
        Self::with_step_schedule(core, vec![gamma])
    }

    /// Step-size variant with one `gamma_t` per timestep (a single entry is
    /// used for every timestep; shorter schedules repeat their last entry).
    pub fn with_step_schedule(core: ControllerCore, gammas: Vec<f32>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::invalid("step_size", "at least one step size is required"));
        }
        if let Some(g) = gammas.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
            return Err(Error::invalid("step_size", format!("must be non-negative, got {g}")));
        }
        Ok(Self { core, step_size: gammas })
    }

    pub fn step_size(&self) -> &[f32] {
        &self.step_size
    }

    pub fn core(&self) -> &ControllerCore {
        &self.core
    }
}

impl Controller for MppiController {
    fn name(&self) -> &str {
        if self.step_size.iter().all(|&g| g == 1.0) {
            "mppi"
        } else {
            "dmd_mpc"
        }
    }

    delegate_core!();

    fn compute_control(&mut self, x0: &StateVector) -> Result<ControllerSolution> {
        let start = Instant::now();
        self.core.check_state(x0)?;
        let x0s = [x0.clone()];
        let mut last_weights = None;
        for _ in 0..self.core.config.iterations {
            let mean = self.core.mean.clone();
            let batch = self.core.draw(&mean)?;
            let result = self.core.evaluate(&x0s, std::slice::from_ref(&mean), &batch)?;
            let weights = compute_weights(result.costs(0), self.core.config.lambda as f64)?;
            let delta = self
                .core
                .engine
                .install(|| weighted_perturbation(&mean, &batch, &weights.weights))?;
            self.core.mean = apply_step(&mean, &delta, &self.step_size);
            last_weights = Some(weights);
        }
        let weights = last_weights.expect("iterations >= 1");
        let controls = self.core.mean.clone();
        self.core.solution(x0, controls, weights, start.elapsed().as_secs_f64() * 1e3)
    }

    fn shift_control_sequence(&mut self, elapsed: f64, dt_min: f64) -> usize {
        self.core.shift(elapsed, dt_min)
    }
}
