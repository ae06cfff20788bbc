use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sampling::NoiseBatch;
use crate::types::ControlTrajectory;

/// Output of the exponential cost transform.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightResult {
    /// Minimum sampled cost, subtracted before exponentiation.
    pub baseline: f64,
    /// Sum of the unnormalized weights.
    pub normalizer: f64,
    pub weights: Vec<f64>,
}

/// `w_m = exp(-(J_m - rho) / lambda) / eta` with `rho = min J` and
/// `eta = sum_m exp(-(J_m - rho) / lambda)`.
///
/// The baseline is reduced sequentially on the calling thread.
pub fn compute_weights(costs: &[f64], lambda: f64) -> Result<WeightResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("must be positive, got {lambda}")));
    }
    if costs.is_empty() {
        return Err(Error::invalid("costs", "at least one sample cost is required"));
    }
    if let Some(index) = costs.iter().position(|c| !c.is_finite()) {
        return Err(Error::invalid("costs", format!("cost of sample {index} is not finite")));
    }
    let baseline = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let inv_lambda = 1.0 / lambda;
    let mut weights: Vec<f64> = costs.iter().map(|c| (-(c - baseline) * inv_lambda).exp()).collect();
    let normalizer: f64 = weights.iter().sum();
    let inv_eta = 1.0 / normalizer;
    for w in &mut weights {
        *w *= inv_eta;
    }
    Ok(WeightResult {
        baseline,
        normalizer,
        weights,
    })
}

/// Per-timestep weighted perturbation `sum_m w_m (v^m_t - u_t)` in `f64`.
///
/// Each `(t, channel)` accumulates over samples in ascending order, so the
/// result does not depend on the worker count.
pub fn weighted_perturbation(mean: &ControlTrajectory, batch: &NoiseBatch, weights: &[f64]) -> Result<Vec<f64>> {
    let n_u = mean.n_u();
    let horizon = mean.horizon();
    if batch.n_u() != n_u || batch.horizon() != horizon {
        return Err(Error::DimensionMismatch {
            what: "noise batch horizon x n_u",
            expected: horizon * n_u,
            actual: batch.horizon() * batch.n_u(),
        });
    }
    if weights.len() != batch.num_samples() {
        return Err(Error::DimensionMismatch {
            what: "weights",
            expected: batch.num_samples(),
            actual: weights.len(),
        });
    }
    let u = mean.as_slice();
    let mut delta = vec![0.0f64; horizon * n_u];
    delta.par_chunks_mut(n_u).enumerate().for_each(|(t, acc)| {
        let mut v = vec![0.0f32; n_u];
        let ut = &u[t * n_u..(t + 1) * n_u];
        for (m, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            batch.sample_into(u, m, t, &mut v);
            for c in 0..n_u {
                acc[c] += w * (v[c] - ut[c]) as f64;
            }
        }
    });
    Ok(delta)
}

/// Applies `u_t + step_t * delta_t`. A step of exactly 1 reproduces the
/// plain update bit for bit.
pub(crate) fn apply_step(mean: &ControlTrajectory, delta: &[f64], step: &[f32]) -> ControlTrajectory {
    let n_u = mean.n_u();
    let controls = mean
        .as_slice()
        .iter()
        .zip(delta)
        .enumerate()
        .map(|(i, (u, d))| {
            let g = step[(i / n_u).min(step.len() - 1)] as f64;
            (*u as f64 + g * d) as f32
        })
        .collect();
    ControlTrajectory::from_parts_unchecked(mean.dt(), n_u, controls)
}

/// Control update `U*_t = u_t + sum_m w_m eps^m_t`, where `eps^m_t` is the
/// sample's offset from the mean.
pub fn weighted_update(mean: &ControlTrajectory, batch: &NoiseBatch, weights: &[f64]) -> Result<ControlTrajectory> {
    let delta = weighted_perturbation(mean, batch, weights)?;
    Ok(apply_step(mean, &delta, &[1.0]))
}
