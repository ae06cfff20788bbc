//! The two evaluation strategies.
//!
//! Work items are `(system, sample)` pairs for dynamics propagation and for
//! the fused pass, and `(system, sample, timestep)` triples for the split
//! cost pass. Per-sample costs are always summed in `f64` with `t`
//! ascending, so both strategies produce identical totals.

use rayon::prelude::*;

use super::{RolloutRequest, RolloutResult, Strategy};
use crate::error::{Error, Result};

/// Minimum timesteps per task in the split cost pass.
const COST_CHUNK: usize = 64;

struct Scratch {
    x: Vec<f32>,
    v: Vec<f32>,
    u: Vec<f32>,
    xdot: Vec<f32>,
    y: Vec<f32>,
}

impl Scratch {
    fn new(req: &RolloutRequest<'_>) -> Self {
        let d = req.dynamics.dims();
        Self {
            x: vec![0.0; d.n_x],
            v: vec![0.0; d.n_u],
            u: vec![0.0; d.n_u],
            xdot: vec![0.0; d.n_x],
            y: vec![0.0; d.n_y],
        }
    }
}

/// Advances `s.x` one step with sample `m`'s control for system `sys`,
/// leaving the sampled control in `s.v` and the output in `s.y`.
#[inline]
fn advance(req: &RolloutRequest<'_>, s: &mut Scratch, sys: usize, m: usize, t: usize) -> Result<()> {
    req.noise.sample_into(req.means[sys].as_slice(), m, t, &mut s.v);
    for (u, v) in s.u.iter_mut().zip(&s.v) {
        *u = *v;
    }
    req.dynamics.step_into(&mut s.x, &mut s.u, req.noise.dt(), &mut s.xdot, &mut s.y);
    if s.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::RolloutDiverged { quantity: "state", system: sys, sample: m, timestep: t });
    }
    Ok(())
}

fn check_cost(total: f64, sys: usize, m: usize, t: usize) -> Result<()> {
    if total.is_finite() {
        Ok(())
    } else {
        Err(Error::RolloutDiverged { quantity: "cost", system: sys, sample: m, timestep: t })
    }
}

pub(super) fn split(req: &RolloutRequest<'_>) -> Result<RolloutResult> {
    let num_systems = req.initial_states.len();
    let m_count = req.noise.num_samples();
    let horizon = req.noise.horizon();
    let n_y = req.dynamics.dims().n_y;
    let traj_len = horizon * n_y;

    // phase 1: dynamics, sequential in t, parallel over (system, sample)
    let mut outputs = vec![0.0f32; num_systems * m_count * traj_len];
    outputs
        .par_chunks_mut(traj_len)
        .enumerate()
        .try_for_each_init(
            || Scratch::new(req),
            |s, (item, out)| -> Result<()> {
                let (sys, m) = (item / m_count, item % m_count);
                s.x.copy_from_slice(req.initial_states[sys].as_slice());
                for t in 0..horizon {
                    advance(req, s, sys, m, t)?;
                    out[t * n_y..(t + 1) * n_y].copy_from_slice(&s.y);
                }
                Ok(())
            },
        )?;

    // phase 2: running costs, parallel over (system, sample, timestep)
    let n_u = req.noise.n_u();
    let mut running = vec![0.0f32; num_systems * m_count * horizon];
    running
        .par_iter_mut()
        .enumerate()
        .with_min_len(COST_CHUNK)
        .for_each_init(
            || vec![0.0f32; n_u],
            |v, (idx, cost)| {
                let t = idx % horizon;
                let item = idx / horizon;
                let (sys, m) = (item / m_count, item % m_count);
                req.noise.sample_into(req.means[sys].as_slice(), m, t, v);
                let y = &outputs[idx * n_y..(idx + 1) * n_y];
                *cost = req.cost.running_cost(y, v, t);
            },
        );

    // reduce per sample, t ascending, then terminal and importance terms
    let importance = importance_terms(req);
    let costs = (0..num_systems * m_count)
        .into_par_iter()
        .map(|item| {
            let (sys, m) = (item / m_count, item % m_count);
            let mut total = 0.0f64;
            for (t, c) in running[item * horizon..(item + 1) * horizon].iter().enumerate() {
                total += *c as f64;
                check_cost(total, sys, m, t)?;
            }
            let last = &outputs[(item * horizon + horizon - 1) * n_y..(item * horizon + horizon) * n_y];
            total += req.cost.terminal_cost(last) as f64;
            total += importance[sys][m];
            check_cost(total, sys, m, horizon - 1)?;
            Ok(total)
        })
        .collect::<Result<Vec<f64>>>()?;

    Ok(RolloutResult::new(
        Strategy::Split,
        num_systems,
        m_count,
        horizon,
        n_y,
        costs,
        Some(outputs),
    ))
}

pub(super) fn fused(req: &RolloutRequest<'_>) -> Result<RolloutResult> {
    let num_systems = req.initial_states.len();
    let m_count = req.noise.num_samples();
    let horizon = req.noise.horizon();
    let n_y = req.dynamics.dims().n_y;
    let importance = importance_terms(req);

    let costs = (0..num_systems * m_count)
        .into_par_iter()
        .map_init(
            || Scratch::new(req),
            |s, item| -> Result<f64> {
                let (sys, m) = (item / m_count, item % m_count);
                s.x.copy_from_slice(req.initial_states[sys].as_slice());
                let mut total = 0.0f64;
                for t in 0..horizon {
                    advance(req, s, sys, m, t)?;
                    total += req.cost.running_cost(&s.y, &s.v, t) as f64;
                    check_cost(total, sys, m, t)?;
                }
                total += req.cost.terminal_cost(&s.y) as f64;
                total += importance[sys][m];
                check_cost(total, sys, m, horizon - 1)?;
                Ok(total)
            },
        )
        .collect::<Result<Vec<f64>>>()?;

    Ok(RolloutResult::new(Strategy::Fused, num_systems, m_count, horizon, n_y, costs, None))
}

/// Re-propagates one sample and returns its `horizon × n_y` outputs.
pub(super) fn replay(req: &RolloutRequest<'_>, sys: usize, m: usize) -> Result<Vec<f32>> {
    let horizon = req.noise.horizon();
    let n_y = req.dynamics.dims().n_y;
    let mut s = Scratch::new(req);
    s.x.copy_from_slice(req.initial_states[sys].as_slice());
    let mut out = Vec::with_capacity(horizon * n_y);
    for t in 0..horizon {
        advance(req, &mut s, sys, m, t)?;
        out.extend_from_slice(&s.y);
    }
    Ok(out)
}

fn importance_terms(req: &RolloutRequest<'_>) -> Vec<Vec<f64>> {
    req.means
        .iter()
        .map(|mean| req.noise.importance_costs(mean.as_slice(), req.lambda, req.importance_sampling))
        .collect()
}
