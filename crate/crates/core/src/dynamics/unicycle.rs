use super::Dynamics;
use crate::types::ModelDims;

/// Kinematic unicycle: state `(X, Y, YAW)`, control `(VEL, YAW_DOT)`,
/// output equal to the state.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unicycle;

impl Dynamics for Unicycle {
    fn name(&self) -> &str {
        "unicycle"
    }

    fn dims(&self) -> ModelDims {
        ModelDims { n_x: 3, n_u: 2, n_y: 3 }
    }

    fn state_names(&self) -> &'static [&'static str] {
        &["X", "Y", "YAW"]
    }

    fn angular_channels(&self) -> &'static [usize] {
        &[2]
    }

    #[inline]
    fn derivative_into(&self, x: &[f32], u: &[f32], xdot: &mut [f32]) {
        let (s, c) = x[2].sin_cos();
        xdot[0] = u[0] * c;
        xdot[1] = u[0] * s;
        xdot[2] = u[1];
    }
}
