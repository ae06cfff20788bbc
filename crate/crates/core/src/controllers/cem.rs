use std::time::Instant;

use super::{delegate_core, Controller, ControllerCore, ControllerSolution};
use crate::engine::{apply_step, weighted_perturbation, WeightResult};
use crate::error::{Error, Result};
use crate::sampling::fraction_count;
use crate::types::StateVector;

/// Uniform weights `1/k` over the `k = ceil(fraction * M)` lowest-cost
/// samples; ties go to the lower sample index.
pub fn elite_weights(costs: &[f64], elite_fraction: f64) -> Result<WeightResult> {
    if !(elite_fraction > 0.0 && elite_fraction <= 1.0) {
        return Err(Error::invalid("elite_fraction", format!("must lie in (0, 1], got {elite_fraction}")));
    }
    if costs.is_empty() {
        return Err(Error::invalid("costs", "at least one sample cost is required"));
    }
    let k = fraction_count(elite_fraction, costs.len()).max(1);
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
    let mut weights = vec![0.0; costs.len()];
    for &m in &order[..k] {
        weights[m] = 1.0 / k as f64;
    }
    Ok(WeightResult { baseline: costs[order[0]], normalizer: k as f64, weights })
}

/// Cross-entropy method: the mean is replaced by the average of the elite
/// samples each iteration; the sampling variance stays fixed.
pub struct CemController {
    core: ControllerCore,
    elite_fraction: f64,
}

impl CemController {
    pub fn new(core: ControllerCore, elite_fraction: f64) -> Result<Self> {
        if !(elite_fraction > 0.0 && elite_fraction <= 1.0) {
            return Err(Error::invalid("elite_fraction", format!("must lie in (0, 1], got {elite_fraction}")));
        }
        Ok(Self { core, elite_fraction })
    }

    pub fn elite_fraction(&self) -> f64 {
        self.elite_fraction
    }
}

impl Controller for CemController {
    fn name(&self) -> &str {
        "cem"
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
            let weights = elite_weights(result.costs(0), self.elite_fraction)?;
            let delta = self
                .core
                .engine
                .install(|| weighted_perturbation(&mean, &batch, &weights.weights))?;
            self.core.mean = apply_step(&mean, &delta, &[1.0]);
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
