use serde::{Deserialize, Serialize};

use super::Dynamics;
use crate::types::ModelDims;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CartpoleParams {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_length: f64,
    pub gravity: f64,
}

impl Default for CartpoleParams {
    fn default() -> Self {
        Self {
            cart_mass: 1.0,
            pole_mass: 1.0,
            pole_length: 1.0,
            gravity: 9.81,
        }
    }
}

impl CartpoleParams {
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        [
            ("cart_mass", self.cart_mass),
            ("pole_mass", self.pole_mass),
            ("pole_length", self.pole_length),
        ]
        .into_iter()
        .filter(|(_, v)| !(*v > 0.0))
        .map(|(name, v)| (name, format!("must be positive, got {v}")))
        .collect()
    }
}

/// Frictionless cart-pole with a point-mass pendulum.
///
/// State `(POS_X, VEL_X, THETA, THETA_DOT)` with `THETA = 0` hanging straight
/// down; control is the horizontal force on the cart.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cartpole {
    params: CartpoleParams,
}

impl Cartpole {
    pub fn new(params: CartpoleParams) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &CartpoleParams {
        &self.params
    }
}

impl Dynamics for Cartpole {
    fn name(&self) -> &str {
        "cartpole"
    }

    fn dims(&self) -> ModelDims {
        ModelDims { n_x: 4, n_u: 1, n_y: 4 }
    }

    fn state_names(&self) -> &'static [&'static str] {
        &["POS_X", "VEL_X", "THETA", "THETA_DOT"]
    }

    fn angular_channels(&self) -> &'static [usize] {
        &[2]
    }

    #[inline]
    fn derivative_into(&self, x: &[f32], u: &[f32], xdot: &mut [f32]) {
        let mc = self.params.cart_mass as f32;
        let mp = self.params.pole_mass as f32;
        let l = self.params.pole_length as f32;
        let g = self.params.gravity as f32;
        let (s, c) = x[2].sin_cos();
        let w = x[3];
        let f = u[0];
        let denom = mc + mp * s * s;
        xdot[0] = x[1];
        xdot[1] = (f + mp * s * (l * w * w + g * c)) / denom;
        xdot[2] = w;
        xdot[3] = (-f * c - mp * l * w * w * c * s - (mc + mp) * g * s) / (l * denom);
    }
}
