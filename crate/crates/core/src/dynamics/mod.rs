//! Dynamics `x_{t+1} = F(x_t, u_t)` and observation `y_t = G(x_t, u_t)`.
//!
//! Models provide a continuous-time derivative; the default discretization
//! is explicit Euler with controls clamped to the model bounds before the
//! derivative is evaluated. Angular state channels are wrapped to
//! `(-pi, pi]` after every step.

use std::collections::HashMap;
use std::f32::consts::PI;

use crate::error::{Error, Result};
use crate::types::{ControlVector, ModelDims, OutputVector, StateVector};

mod cartpole;
mod diff_drive;
mod double_integrator;
mod unicycle;

pub use cartpole::{Cartpole, CartpoleParams};
pub use diff_drive::{DiffDrive, DiffDriveParams};
pub use double_integrator::DoubleIntegrator2D;
pub use unicycle::Unicycle;

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f32) -> f32 {
    if a > -PI && a <= PI {
        return a;
    }
    let two_pi = 2.0 * PI;
    let w = a - two_pi * ((a - PI) / two_pi).ceil();
    // rounding can leave w a hair outside the interval
    if w <= -PI {
        w + two_pi
    } else if w > PI {
        w - two_pi
    } else {
        w
    }
}

/// A dynamical system usable by the rollout engine.
///
/// The `*_into` methods are the allocation-free hot path used by rollouts;
/// they assume correctly sized, finite inputs. The remaining methods are the
/// checked public surface.
pub trait Dynamics: Send + Sync {
    fn name(&self) -> &str;

    fn dims(&self) -> ModelDims;

    /// Names of the state channels, indexed like the state vector.
    fn state_names(&self) -> &'static [&'static str];

    /// State channels holding angles; these wrap and interpolate on the circle.
    fn angular_channels(&self) -> &'static [usize] {
        &[]
    }

    /// Continuous-time derivative `xdot = f(x, u)`. `u` is already clamped.
    fn derivative_into(&self, x: &[f32], u: &[f32], xdot: &mut [f32]);

    /// Clamps a control in place to the model's admissible set.
    fn enforce_constraints(&self, _u: &mut [f32]) {}

    /// Observation map `G`. Defaults to the identity on the state.
    fn observe_into(&self, x: &[f32], _u: &[f32], y: &mut [f32]) {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = *xi;
        }
    }

    fn zero_state(&self) -> StateVector {
        StateVector::zeros(self.dims().n_x)
    }

    /// One Euler step in place: clamp `u`, `x += dt * f(x, u)`, wrap angles,
    /// then `y = G(x, u)`. `u` and `scratch` are caller-owned buffers of
    /// length `n_u` and `n_x`.
    #[inline]
    fn step_into(&self, x: &mut [f32], u: &mut [f32], dt: f32, scratch: &mut [f32], y: &mut [f32]) {
        self.enforce_constraints(u);
        self.derivative_into(x, u, scratch);
        for (xi, di) in x.iter_mut().zip(scratch.iter()) {
            *xi += dt * di;
        }
        for &c in self.angular_channels() {
            x[c] = wrap_angle(x[c]);
        }
        self.observe_into(x, u, y);
    }

    /// Checked `f(x, u)`. Controls are clamped before evaluation.
    fn state_derivative(&self, x: &StateVector, u: &ControlVector) -> Result<StateVector> {
        let dims = self.dims();
        x.expect_dim(dims.n_x)?;
        u.expect_dim(dims.n_u)?;
        let mut uc = u.as_slice().to_vec();
        self.enforce_constraints(&mut uc);
        let mut xdot = vec![0.0; dims.n_x];
        self.derivative_into(x.as_slice(), &uc, &mut xdot);
        StateVector::new(xdot)
    }

    /// Checked Euler step returning `(x_next, y)`.
    fn step(&self, x: &StateVector, u: &ControlVector, dt: f32) -> Result<(StateVector, OutputVector)> {
        let dims = self.dims();
        x.expect_dim(dims.n_x)?;
        u.expect_dim(dims.n_u)?;
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        let mut xn = x.as_slice().to_vec();
        let mut uc = u.as_slice().to_vec();
        let mut scratch = vec![0.0; dims.n_x];
        let mut y = vec![0.0; dims.n_y];
        self.step_into(&mut xn, &mut uc, dt, &mut scratch, &mut y);
        if let Some(channel) = xn.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState {
                channel,
                name: self.state_names()[channel],
            });
        }
        Ok((StateVector::from_vec_unchecked(xn), OutputVector::new(y)?))
    }

    /// Builds a state from `name -> value` pairs; unnamed channels are zero.
    fn state_from_named_values(&self, values: &HashMap<String, f32>) -> Result<StateVector> {
        let names = self.state_names();
        let mut x = self.zero_state().into_inner();
        for (name, &v) in values {
            let idx = names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::UnknownStateName {
                    name: name.clone(),
                    valid: names.to_vec(),
                })?;
            x[idx] = v;
        }
        StateVector::new(x)
    }

    /// Linear interpolation between states; angular channels follow the
    /// shorter arc and are re-wrapped.
    fn interpolate_states(&self, a: &StateVector, b: &StateVector, t: f32) -> Result<StateVector> {
        let n_x = self.dims().n_x;
        a.expect_dim(n_x)?;
        b.expect_dim(n_x)?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid("t", format!("must lie in [0, 1], got {t}")));
        }
        let angular = self.angular_channels();
        let out = (0..n_x)
            .map(|i| {
                let (xa, xb) = (a[i], b[i]);
                if t == 0.0 {
                    xa
                } else if angular.contains(&i) {
                    wrap_angle(xa + t * wrap_angle(xb - xa))
                } else {
                    xa + t * (xb - xa)
                }
            })
            .collect();
        StateVector::new(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_half_open_interval() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-6);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-5);
        assert!((wrap_angle(0.5 + 4.0 * PI) - 0.5).abs() < 1e-5);
        for k in -50..50 {
            let a = k as f32 * 0.37;
            let w = wrap_angle(a);
            assert!(w > -PI && w <= PI, "{a} -> {w}");
            let turns = (a - w) / (2.0 * PI);
            assert!((turns - turns.round()).abs() < 1e-4);
        }
    }

    #[test]
    fn named_values() {
        let m = Unicycle;
        let mut map = HashMap::new();
        map.insert("YAW".to_string(), 1.5);
        assert_eq!(m.state_from_named_values(&map).unwrap().as_slice(), &[0.0, 0.0, 1.5]);
        assert_eq!(m.state_from_named_values(&HashMap::new()).unwrap(), m.zero_state());
        let mut bogus = HashMap::new();
        bogus.insert("BOGUS".to_string(), 1.0);
        let err = m.state_from_named_values(&bogus).unwrap_err();
        assert!(err.to_string().contains("YAW"), "{err}");
    }

    #[test]
    fn interpolation() {
        let m = Unicycle;
        let x = StateVector::new(vec![1.0, -2.0, 0.3]).unwrap();
        assert_eq!(m.interpolate_states(&x, &x, 0.5).unwrap(), x);
        let y = StateVector::new(vec![3.0, 2.0, -0.3]).unwrap();
        assert_eq!(m.interpolate_states(&x, &y, 0.0).unwrap(), x);
        assert!(m.interpolate_states(&x, &y, 1.5).is_err());
        assert!(m.interpolate_states(&x, &y, -0.1).is_err());
        let mid = m.interpolate_states(&x, &y, 0.5).unwrap();
        assert_eq!(&mid.as_slice()[..2], &[2.0, 0.0]);
    }

    /// Circular-mean oracle: the midpoint of two angles on the shorter arc is
    /// the direction of the sum of their unit vectors.
    #[test]
    fn yaw_interpolates_on_shorter_arc() {
        let m = Unicycle;
        let pairs = [(3.1f32, -3.1f32), (-3.0, 2.9), (0.2, -0.4), (1.0, 2.5), (-1.5, 1.5 - 0.01)];
        for (ya, yb) in pairs {
            let a = StateVector::new(vec![0.0, 0.0, ya]).unwrap();
            let b = StateVector::new(vec![0.0, 0.0, yb]).unwrap();
            let got = m.interpolate_states(&a, &b, 0.5).unwrap()[2] as f64;
            let (ya, yb) = (ya as f64, yb as f64);
            let oracle = (ya.sin() + yb.sin()).atan2(ya.cos() + yb.cos());
            let diff = (got - oracle).sin().abs();
            assert!(diff < 1e-5, "{ya} {yb}: got {got}, oracle {oracle}");
            assert!((got - oracle).cos() > 0.0);
        }
        let a = StateVector::new(vec![0.0, 0.0, 3.1]).unwrap();
        let b = StateVector::new(vec![0.0, 0.0, -3.1]).unwrap();
        let mid = m.interpolate_states(&a, &b, 0.5).unwrap()[2];
        assert!((mid.abs() - PI).abs() < 1e-5, "{mid}");
    }
}
