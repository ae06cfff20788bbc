use std::time::Instant;

use super::{delegate_core, Controller, ControllerCore, ControllerSolution, TailFill};
use crate::engine::{apply_step, compute_weights, weighted_perturbation};
use crate::error::{Error, Result};
use crate::feedback::{FeedbackController, Pid};
use crate::types::{ControlTrajectory, ControlVector, StateVector};

/// Result of one Tube-MPPI solve.
#[derive(Debug, Clone)]
pub struct TubeSolution {
    pub real: ControllerSolution,
    pub nominal: ControllerSolution,
    /// First nominal control plus tracking feedback toward the nominal state.
    pub applied: ControlVector,
    /// Nominal state the solve started from.
    pub nominal_state: StateVector,
    /// True when the nominal state was re-seeded from the real state.
    pub nominal_reset: bool,
}

/// MPPI run on a disturbance-free nominal copy of the system and on the
/// measured system at once, sharing one noise batch. The nominal state only
/// ever advances through the model; the applied control tracks it with the
/// feedback law.
///
/// Without a constrained re-initialization step the nominal system can
/// drift away from the real one indefinitely, so an optional bound on the
/// Euclidean state gap re-seeds the nominal state from the measurement.
pub struct TubeMppiController<F: FeedbackController = Pid> {
    core: ControllerCore,
    feedback: F,
    feedback_state: F::State,
    real_mean: ControlTrajectory,
    nominal_state: Option<StateVector>,
    reset_bound: Option<f32>,
}

impl<F: FeedbackController> TubeMppiController<F> {
    pub fn new(core: ControllerCore, feedback: F, reset_bound: Option<f32>) -> Result<Self> {
        let dims = core.dynamics.dims();
        if feedback.dims().n_x != dims.n_x || feedback.dims().n_u != dims.n_u {
            return Err(Error::DimensionMismatch {
                what: "feedback n_u x n_x",
                expected: dims.n_u * dims.n_x,
                actual: feedback.dims().n_u * feedback.dims().n_x,
            });
        }
        if let Some(b) = reset_bound {
            if !(b > 0.0) {
                return Err(Error::invalid("reset_bound", format!("must be positive, got {b}")));
            }
        }
        let feedback_state = feedback.initial_state();
        let real_mean = core.mean.clone();
        Ok(Self { core, feedback, feedback_state, real_mean, nominal_state: None, reset_bound })
    }

    pub fn nominal_state(&self) -> Option<&StateVector> {
        self.nominal_state.as_ref()
    }

    pub fn set_nominal_state(&mut self, x: StateVector) -> Result<()> {
        self.core.check_state(&x)?;
        self.nominal_state = Some(x);
        Ok(())
    }

    pub fn real_control_sequence(&self) -> &ControlTrajectory {
        &self.real_mean
    }

    pub fn feedback(&self) -> &F {
        &self.feedback
    }

    pub fn feedback_mut(&mut self) -> &mut F {
        &mut self.feedback
    }

    pub fn reset_bound(&self) -> Option<f32> {
        self.reset_bound
    }

    /// Solves both systems from `x_real` and the stored nominal state.
    pub fn tube_compute_control(&mut self, x_real: &StateVector) -> Result<TubeSolution> {
        let start = Instant::now();
        self.core.check_state(x_real)?;
        let mut nominal_reset = false;
        let x_nom = match &self.nominal_state {
            Some(x) if !self.exceeds_bound(x, x_real) => x.clone(),
            _ => {
                nominal_reset = true;
                x_real.clone()
            }
        };
        self.nominal_state = Some(x_nom.clone());

        let x0s = [x_nom.clone(), x_real.clone()];
        let mut last = None;
        for _ in 0..self.core.config.iterations {
            let means = [self.core.mean.clone(), self.real_mean.clone()];
            let batch = self.core.draw(&means[0])?;
            let result = self.core.evaluate(&x0s, &means, &batch)?;
            let lambda = self.core.config.lambda as f64;
            let w_nom = compute_weights(result.costs(0), lambda)?;
            let w_real = compute_weights(result.costs(1), lambda)?;
            let engine = &self.core.engine;
            let (d_nom, d_real) = engine.install(|| {
                Ok::<_, Error>((
                    weighted_perturbation(&means[0], &batch, &w_nom.weights)?,
                    weighted_perturbation(&means[1], &batch, &w_real.weights)?,
                ))
            })?;
            self.core.mean = apply_step(&means[0], &d_nom, &[1.0]);
            self.real_mean = apply_step(&means[1], &d_real, &[1.0]);
            last = Some((w_nom, w_real));
        }
        let (w_nom, w_real) = last.expect("iterations >= 1");
        let solve_ms = start.elapsed().as_secs_f64() * 1e3;
        let nominal = self.core.solution(&x_nom, self.core.mean.clone(), w_nom, solve_ms)?;
        let real = self.core.solution(x_real, self.real_mean.clone(), w_real, solve_ms)?;

        self.feedback.compute_feedback_gains(&nominal.states)?;
        let fb = self.feedback.feedback(x_real, &x_nom, &mut self.feedback_state)?;
        let applied = ControlVector::new(
            nominal.controls.at(0).iter().zip(fb.as_slice()).map(|(u, k)| u + k).collect(),
        )?;
        Ok(TubeSolution { real, nominal, applied, nominal_state: x_nom, nominal_reset })
    }

    fn exceeds_bound(&self, x_nom: &StateVector, x_real: &StateVector) -> bool {
        match self.reset_bound {
            None => false,
            Some(bound) => {
                let gap: f32 = x_nom.as_slice().iter().zip(x_real.as_slice()).map(|(a, b)| (a - b).powi(2)).sum();
                gap.sqrt() > bound
            }
        }
    }

    /// Propagates the nominal state through the model under the first
    /// `steps` nominal controls.
    fn advance_nominal(&mut self, steps: usize) {
        let Some(mut x) = self.nominal_state.take() else { return };
        let mean = &self.core.mean;
        let horizon = mean.horizon();
        let zero = ControlVector::zeros(mean.n_u());
        for k in 0..steps {
            let u = if k < horizon {
                mean.control(k)
            } else {
                match self.core.config.tail_fill {
                    TailFill::RepeatLast => mean.control(horizon - 1),
                    TailFill::Zero => zero.clone(),
                }
            };
            match self.core.dynamics.step(&x, &u, mean.dt()) {
                Ok((next, _)) => x = next,
                // re-seeded from the measurement on the next solve
                Err(_) => return,
            }
        }
        self.nominal_state = Some(x);
    }
}

impl<F: FeedbackController> Controller for TubeMppiController<F> {
    fn name(&self) -> &str {
        "tube_mppi"
    }

    delegate_core!();

    /// Returns the nominal solution.
    fn compute_control(&mut self, x0: &StateVector) -> Result<ControllerSolution> {
        Ok(self.tube_compute_control(x0)?.nominal)
    }

    /// Shifts both means and moves the nominal state forward by the same
    /// number of control steps.
    fn shift_control_sequence(&mut self, elapsed: f64, dt_min: f64) -> usize {
        let steps = super::shift_steps(elapsed, dt_min, self.core.config.dt as f64);
        self.advance_nominal(steps);
        self.core.shift(elapsed, dt_min);
        self.real_mean = super::shift_trajectory(&self.real_mean, steps, self.core.config.tail_fill);
        steps
    }
}
