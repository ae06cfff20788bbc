use serde::{Deserialize, Serialize};

use super::CostFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircleTrackParams {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub off_track_cost: f64,
    pub speed_target: f64,
    pub speed_coeff: f64,
    pub angular_momentum_target: f64,
    pub angular_momentum_coeff: f64,
}

impl Default for CircleTrackParams {
    fn default() -> Self {
        Self {
            inner_radius: 1.875,
            outer_radius: 2.125,
            off_track_cost: 1000.0,
            speed_target: 2.0,
            speed_coeff: 2.0,
            angular_momentum_target: 4.0,
            angular_momentum_coeff: 2.0,
        }
    }
}

impl CircleTrackParams {
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !(self.inner_radius < self.outer_radius) {
            out.push((
                "inner_radius",
                format!("inner radius {} must be below outer radius {}", self.inner_radius, self.outer_radius),
            ));
        }
        for (name, v) in [
            ("off_track_cost", self.off_track_cost),
            ("speed_coeff", self.speed_coeff),
            ("angular_momentum_coeff", self.angular_momentum_coeff),
        ] {
            if !(v >= 0.0) {
                out.push((name, format!("must be non-negative, got {v}")));
            }
        }
        out
    }
}

/// Track-following cost for the planar double integrator: a large penalty
/// for leaving the annulus plus L1 terms on speed and angular momentum.
///
/// Both annulus indicators are non-strict (`r^2 <= inner^2`, `r^2 >= outer^2`).
/// Terminal cost is 0.
#[derive(Debug, Clone, Copy)]
pub struct CircleTrackCost {
    inner_sq: f32,
    outer_sq: f32,
    off_track: f32,
    speed_target: f32,
    speed_coeff: f32,
    momentum_target: f32,
    momentum_coeff: f32,
}

impl CircleTrackCost {
    pub fn new(p: CircleTrackParams) -> Self {
        Self {
            inner_sq: (p.inner_radius * p.inner_radius) as f32,
            outer_sq: (p.outer_radius * p.outer_radius) as f32,
            off_track: p.off_track_cost as f32,
            speed_target: p.speed_target as f32,
            speed_coeff: p.speed_coeff as f32,
            momentum_target: p.angular_momentum_target as f32,
            momentum_coeff: p.angular_momentum_coeff as f32,
        }
    }
}

impl Default for CircleTrackCost {
    fn default() -> Self {
        Self::new(CircleTrackParams::default())
    }
}

impl CostFunction for CircleTrackCost {
    fn name(&self) -> &str {
        "circle_track"
    }

    fn output_dim(&self) -> Option<usize> {
        Some(4)
    }

    #[inline]
    fn running_cost(&self, y: &[f32], _u: &[f32], _t: usize) -> f32 {
        let (px, py, vx, vy) = (y[0], y[1], y[2], y[3]);
        let r_sq = px * px + py * py;
        let mut cost = 0.0;
        if r_sq <= self.inner_sq {
            cost += self.off_track;
        }
        if r_sq >= self.outer_sq {
            cost += self.off_track;
        }
        let speed = (vx * vx + vy * vy).sqrt();
        cost += self.speed_coeff * (self.speed_target - speed).abs();
        cost += self.momentum_coeff * (self.momentum_target - (px * vy - py * vx)).abs();
        cost
    }

    fn terminal_cost(&self, _y: &[f32]) -> f32 {
        0.0
    }
}
