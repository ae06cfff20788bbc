//! Tracking feedback `k(x, x*)` applied on top of the optimized control.

use crate::error::{Error, Result};
use crate::types::{ControlVector, ModelDims, StateVector};

/// A feedback law with caller-owned memory.
pub trait FeedbackController: Send + Sync {
    type State: Send;

    fn dims(&self) -> ModelDims;

    /// Fresh per-loop memory.
    fn initial_state(&self) -> Self::State;

    /// Feedback control pulling `x` toward `x_ref`.
    fn feedback(&self, x: &StateVector, x_ref: &StateVector, state: &mut Self::State) -> Result<ControlVector>;

    /// Recomputes gains for a new reference trajectory.
    fn compute_feedback_gains(&mut self, trajectory: &[StateVector]) -> Result<()>;
}

/// Full-matrix PID gains. Each matrix is `n_u x n_x`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PidGains {
    pub kp: Vec<f32>,
    pub ki: Vec<f32>,
    pub kd: Vec<f32>,
    pub dt: f32,
    /// Optional symmetric clamp on each integral channel.
    pub integral_limit: Option<f32>,
}

impl PidGains {
    pub fn zeros(dims: ModelDims, dt: f32) -> Self {
        let n = dims.n_u * dims.n_x;
        Self { kp: vec![0.0; n], ki: vec![0.0; n], kd: vec![0.0; n], dt, integral_limit: None }
    }

    /// `K_p` with ones on the leading diagonal, other gains zero.
    pub fn proportional_identity(dims: ModelDims, dt: f32) -> Self {
        let mut g = Self::zeros(dims, dt);
        for i in 0..dims.n_u.min(dims.n_x) {
            g.kp[i * dims.n_x + i] = 1.0;
        }
        g
    }
}

/// Integral and derivative memory for one control loop.
#[derive(Debug, Clone, PartialEq)]
pub struct PidState {
    pub integral: Vec<f32>,
    pub prev_error: Vec<f32>,
    pub initialized: bool,
}

impl PidState {
    pub fn new(n_x: usize) -> Self {
        Self { integral: vec![0.0; n_x], prev_error: vec![0.0; n_x], initialized: false }
    }

    pub fn reset(&mut self) {
        self.integral.fill(0.0);
        self.prev_error.fill(0.0);
        self.initialized = false;
    }
}

/// `u = K_p e + K_i integral(e dt) + K_d (e - e_prev) / dt` with
/// `e = x_ref - x`. The derivative term is zero on the first call after a
/// reset; the integral is updated before it is used.
#[derive(Debug, Clone)]
pub struct Pid {
    dims: ModelDims,
    gains: PidGains,
}

impl Pid {
    pub fn new(dims: ModelDims, gains: PidGains) -> Result<Self> {
        let n = dims.n_u * dims.n_x;
        for (name, m) in [("kp", &gains.kp), ("ki", &gains.ki), ("kd", &gains.kd)] {
            if m.len() != n {
                return Err(Error::DimensionMismatch { what: name_of(name), expected: n, actual: m.len() });
            }
            crate::types::check_finite(name_of(name), m)?;
        }
        if !(gains.dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {}", gains.dt)));
        }
        Ok(Self { dims, gains })
    }

    pub fn gains(&self) -> &PidGains {
        &self.gains
    }

    pub fn gains_mut(&mut self) -> &mut PidGains {
        &mut self.gains
    }
}

fn name_of(name: &str) -> &'static str {
    match name {
        "kp" => "K_p",
        "ki" => "K_i",
        _ => "K_d",
    }
}

fn mat_vec(m: &[f32], v: &[f32], out: &mut [f32]) {
    let cols = v.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o += m[r * cols..(r + 1) * cols].iter().zip(v).map(|(a, b)| a * b).sum::<f32>();
    }
}

impl FeedbackController for Pid {
    type State = PidState;

    fn dims(&self) -> ModelDims {
        self.dims
    }

    fn initial_state(&self) -> PidState {
        PidState::new(self.dims.n_x)
    }

    fn feedback(&self, x: &StateVector, x_ref: &StateVector, state: &mut PidState) -> Result<ControlVector> {
        x.expect_dim(self.dims.n_x)?;
        x_ref.expect_dim(self.dims.n_x)?;
        let g = &self.gains;
        let e: Vec<f32> = x_ref.as_slice().iter().zip(x.as_slice()).map(|(r, s)| r - s).collect();
        for (acc, ei) in state.integral.iter_mut().zip(&e) {
            *acc += ei * g.dt;
            if let Some(limit) = g.integral_limit {
                *acc = acc.clamp(-limit, limit);
            }
        }
        let de: Vec<f32> = if state.initialized {
            e.iter().zip(&state.prev_error).map(|(a, b)| (a - b) / g.dt).collect()
        } else {
            vec![0.0; e.len()]
        };
        let mut u = vec![0.0; self.dims.n_u];
        mat_vec(&g.kp, &e, &mut u);
        mat_vec(&g.ki, &state.integral, &mut u);
        mat_vec(&g.kd, &de, &mut u);
        state.prev_error.copy_from_slice(&e);
        state.initialized = true;
        ControlVector::new(u)
    }

    /// Gains are persistent; nothing to recompute.
    fn compute_feedback_gains(&mut self, _trajectory: &[StateVector]) -> Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dims() -> ModelDims {
        ModelDims { n_x: 3, n_u: 2, n_y: 3 }
    }

    fn sv(v: &[f32]) -> StateVector {
        StateVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn zero_error_zero_feedback() {
        let pid = Pid::new(dims(), PidGains::proportional_identity(dims(), 0.1)).unwrap();
        let mut s = pid.initial_state();
        let x = sv(&[1.0, 2.0, 3.0]);
        assert_eq!(pid.feedback(&x, &x, &mut s).unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn pure_proportional() {
        let pid = Pid::new(dims(), PidGains::proportional_identity(dims(), 0.1)).unwrap();
        let mut s = pid.initial_state();
        let u = pid.feedback(&sv(&[0.0; 3]), &sv(&[1.0, 0.0, 0.0]), &mut s).unwrap();
        assert_eq!(u.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn integral_accumulates() {
        let d = ModelDims { n_x: 1, n_u: 1, n_y: 1 };
        let gains = PidGains { ki: vec![1.0], ..PidGains::zeros(d, 0.1) };
        let pid = Pid::new(d, gains).unwrap();
        let mut s = pid.initial_state();
        let out: Vec<f32> = (0..3)
            .map(|_| pid.feedback(&sv(&[0.0]), &sv(&[1.0]), &mut s).unwrap()[0])
            .collect();
        for (got, want) in out.iter().zip([0.1, 0.2, 0.3]) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn derivative_zero_on_first_call_then_difference() {
        let d = ModelDims { n_x: 1, n_u: 1, n_y: 1 };
        let gains = PidGains { kd: vec![1.0], ..PidGains::zeros(d, 0.5) };
        let pid = Pid::new(d, gains).unwrap();
        let mut s = pid.initial_state();
        assert_eq!(pid.feedback(&sv(&[0.0]), &sv(&[1.0]), &mut s).unwrap()[0], 0.0);
        assert_eq!(pid.feedback(&sv(&[0.0]), &sv(&[2.0]), &mut s).unwrap()[0], 2.0);
    }

    #[test]
    fn integral_limit_clamps() {
        let d = ModelDims { n_x: 1, n_u: 1, n_y: 1 };
        let gains = PidGains { ki: vec![1.0], integral_limit: Some(0.15), ..PidGains::zeros(d, 0.1) };
        let pid = Pid::new(d, gains).unwrap();
        let mut s = pid.initial_state();
        for _ in 0..5 {
            pid.feedback(&sv(&[0.0]), &sv(&[1.0]), &mut s).unwrap();
        }
        assert!((s.integral[0] - 0.15).abs() < 1e-7);
    }

    #[test]
    fn reset_reproduces_fresh_sequence() {
        let d = dims();
        let gains = PidGains {
            kp: vec![0.5; 6],
            ki: vec![0.2; 6],
            kd: vec![0.1; 6],
            ..PidGains::zeros(d, 0.05)
        };
        let pid = Pid::new(d, gains).unwrap();
        let run = |s: &mut PidState| -> Vec<ControlVector> {
            (0..4).map(|_| pid.feedback(&sv(&[0.0; 3]), &sv(&[0.3, -0.2, 1.0]), s).unwrap()).collect()
        };
        let mut used = pid.initial_state();
        let first = run(&mut used);
        used.reset();
        assert_eq!(used, pid.initial_state());
        assert_eq!(run(&mut used), first);
    }

    #[test]
    fn gain_recompute_is_a_no_op_but_external_edits_apply() {
        let mut pid = Pid::new(dims(), PidGains::proportional_identity(dims(), 0.1)).unwrap();
        let before = pid.gains().clone();
        let traj = vec![sv(&[1.0, 1.0, 1.0]); 3];
        pid.compute_feedback_gains(&traj).unwrap();
        pid.compute_feedback_gains(&traj).unwrap();
        assert_eq!(pid.gains(), &before);
        pid.gains_mut().kp[0] = 3.0;
        let mut s = pid.initial_state();
        let u = pid.feedback(&sv(&[0.0; 3]), &sv(&[1.0, 0.0, 0.0]), &mut s).unwrap();
        assert_eq!(u[0], 3.0);
    }

    #[test]
    fn rejects_bad_gains() {
        assert!(Pid::new(dims(), PidGains { kp: vec![0.0; 5], ..PidGains::zeros(dims(), 0.1) }).is_err());
        assert!(Pid::new(dims(), PidGains::zeros(dims(), 0.0)).is_err());
    }

    proptest! {
        #[test]
        fn proportional_feedback_is_linear(
            kp in prop::collection::vec(-3.0f32..3.0, 6),
            e in prop::collection::vec(-2.0f32..2.0, 3),
            alpha in -4.0f32..4.0,
        ) {
            let pid = Pid::new(dims(), PidGains { kp, ..PidGains::zeros(dims(), 0.1) }).unwrap();
            let zero = sv(&[0.0; 3]);
            let scaled: Vec<f32> = e.iter().map(|v| alpha * v).collect();
            let base = pid.feedback(&zero, &sv(&e), &mut pid.initial_state()).unwrap();
            let out = pid.feedback(&zero, &sv(&scaled), &mut pid.initial_state()).unwrap();
            for c in 0..2 {
                prop_assert!((out[c] - alpha * base[c]).abs() < 1e-4);
            }
        }
    }
}
