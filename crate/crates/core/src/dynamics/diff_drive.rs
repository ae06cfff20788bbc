use serde::{Deserialize, Serialize};

use super::Dynamics;
use crate::types::ModelDims;

/// Differential-drive parameters. Defaults are the benchmark values.
///
/// `wheel_radius` and `wheel_length` describe the wheel geometry for a
/// wheel-speed control variant; the default `(v, omega)` control ignores them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffDriveParams {
    pub wheel_radius: f64,
    pub wheel_length: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl Default for DiffDriveParams {
    fn default() -> Self {
        Self {
            wheel_radius: 1.0,
            wheel_length: 1.0,
            v_min: -0.35,
            v_max: 0.5,
            omega_min: -0.5,
            omega_max: 0.5,
        }
    }
}

impl DiffDriveParams {
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !(self.v_min < self.v_max) {
            out.push(("v_min", format!("v_min {} must be below v_max {}", self.v_min, self.v_max)));
        }
        if !(self.omega_min < self.omega_max) {
            out.push((
                "omega_min",
                format!("omega_min {} must be below omega_max {}", self.omega_min, self.omega_max),
            ));
        }
        for (name, v) in [("wheel_radius", self.wheel_radius), ("wheel_length", self.wheel_length)] {
            if !(v > 0.0) {
                out.push((name, format!("must be positive, got {v}")));
            }
        }
        out
    }
}

/// Differential drive with `(x, y, theta)` state and clamped `(v, omega)`
/// control.
#[derive(Debug, Clone, Copy)]
pub struct DiffDrive {
    params: DiffDriveParams,
    lo: [f32; 2],
    hi: [f32; 2],
}

impl DiffDrive {
    pub fn new(params: DiffDriveParams) -> Self {
        Self {
            params,
            lo: [params.v_min as f32, params.omega_min as f32],
            hi: [params.v_max as f32, params.omega_max as f32],
        }
    }

    pub fn params(&self) -> &DiffDriveParams {
        &self.params
    }

    /// Left/right wheel angular speeds producing `(v, omega)`.
    pub fn wheel_speeds(&self, v: f32, omega: f32) -> (f32, f32) {
        let r = self.params.wheel_radius as f32;
        let half = 0.5 * self.params.wheel_length as f32;
        ((v - omega * half) / r, (v + omega * half) / r)
    }
}

impl Default for DiffDrive {
    fn default() -> Self {
        Self::new(DiffDriveParams::default())
    }
}

impl Dynamics for DiffDrive {
    fn name(&self) -> &str {
        "diff_drive"
    }

    fn dims(&self) -> ModelDims {
        ModelDims { n_x: 3, n_u: 2, n_y: 3 }
    }

    fn state_names(&self) -> &'static [&'static str] {
        &["X", "Y", "THETA"]
    }

    fn angular_channels(&self) -> &'static [usize] {
        &[2]
    }

    fn enforce_constraints(&self, u: &mut [f32]) {
        for i in 0..2 {
            u[i] = u[i].clamp(self.lo[i], self.hi[i]);
        }
    }

    #[inline]
    fn derivative_into(&self, x: &[f32], u: &[f32], xdot: &mut [f32]) {
        let (s, c) = x[2].sin_cos();
        xdot[0] = u[0] * c;
        xdot[1] = u[0] * s;
        xdot[2] = u[1];
    }
}
