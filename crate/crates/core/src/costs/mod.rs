//! Running cost `l(y, u)` and terminal cost `phi(y)` evaluated on outputs.

use crate::error::Result;
use crate::types::{ControlVector, OutputVector};

mod circle_track;
mod costmap;
mod diff_drive_nav;
mod quadratic;
mod road;

pub use circle_track::{CircleTrackCost, CircleTrackParams};
pub use costmap::{Costmap2D, CostmapError, CostmapSpec, Rect};
pub use diff_drive_nav::{DiffDriveNavCost, DiffDriveNavParams};
pub use quadratic::{QuadraticCost, QuadraticCostParams};
pub use road::{RoadCost, RoadCostParams};

/// A trajectory cost. Both terms must be pure and return finite,
/// non-negative values for finite inputs.
pub trait CostFunction: Send + Sync {
    fn name(&self) -> &str;

    /// Output dimension this cost expects, if it is fixed.
    fn output_dim(&self) -> Option<usize> {
        None
    }

    fn running_cost(&self, y: &[f32], u: &[f32], t: usize) -> f32;

    fn terminal_cost(&self, y: &[f32]) -> f32;

    /// Checked wrapper around [`CostFunction::running_cost`].
    fn evaluate_running(&self, y: &OutputVector, u: &ControlVector, t: usize) -> Result<f32> {
        if let Some(n) = self.output_dim() {
            y.expect_dim(n)?;
        }
        Ok(self.running_cost(y.as_slice(), u.as_slice(), t))
    }

    /// Checked wrapper around [`CostFunction::terminal_cost`].
    fn evaluate_terminal(&self, y: &OutputVector) -> Result<f32> {
        if let Some(n) = self.output_dim() {
            y.expect_dim(n)?;
        }
        Ok(self.terminal_cost(y.as_slice()))
    }
}

/// A cost that is identically zero; handy for exercising the engine.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroCost;

impl CostFunction for ZeroCost {
    fn name(&self) -> &str {
        "zero"
    }

    fn running_cost(&self, _y: &[f32], _u: &[f32], _t: usize) -> f32 {
        0.0
    }

    fn terminal_cost(&self, _y: &[f32]) -> f32 {
        0.0
    }
}
