use super::Dynamics;
use crate::types::ModelDims;

/// Planar double integrator: state `(x, y, v_x, v_y)`, control `(a_x, a_y)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleIntegrator2D;

impl Dynamics for DoubleIntegrator2D {
    fn name(&self) -> &str {
        "double_integrator"
    }

    fn dims(&self) -> ModelDims {
        ModelDims { n_x: 4, n_u: 2, n_y: 4 }
    }

    fn state_names(&self) -> &'static [&'static str] {
        &["POS_X", "POS_Y", "VEL_X", "VEL_Y"]
    }

    #[inline]
    fn derivative_into(&self, x: &[f32], u: &[f32], xdot: &mut [f32]) {
        xdot[0] = x[2];
        xdot[1] = x[3];
        xdot[2] = u[0];
        xdot[3] = u[1];
    }
}
