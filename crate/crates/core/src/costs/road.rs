use serde::{Deserialize, Serialize};

use super::CostFunction;

/// Keeps a unicycle on a road running along the x axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadCostParams {
    /// Half-width of the road in meters, measured from the centerline.
    pub road_width: f64,
    pub linear_coeff: f64,
    pub quadratic_coeff: f64,
}

impl Default for RoadCostParams {
    fn default() -> Self {
        Self {
            road_width: 2.0,
            linear_coeff: 1.0,
            quadratic_coeff: 1.0,
        }
    }
}

impl RoadCostParams {
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        [
            ("road_width", self.road_width),
            ("linear_coeff", self.linear_coeff),
            ("quadratic_coeff", self.quadratic_coeff),
        ]
        .into_iter()
        .filter(|(_, v)| !(*v > 0.0))
        .map(|(name, v)| (name, format!("must be positive, got {v}")))
        .collect()
    }
}

/// `c |y|` on the road, `c w + c2 (|y| - w)^2` beyond it. Terminal cost is 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct RoadCost {
    width: f32,
    linear: f32,
    quadratic: f32,
}

impl RoadCost {
    pub fn new(params: RoadCostParams) -> Self {
        Self {
            width: params.road_width as f32,
            linear: params.linear_coeff as f32,
            quadratic: params.quadratic_coeff as f32,
        }
    }

    fn on_road(&self, d: f32) -> f32 {
        self.linear * d
    }

    fn off_road(&self, d: f32) -> f32 {
        let over = d - self.width;
        self.linear * self.width + self.quadratic * over * over
    }

    pub fn lateral_cost(&self, lateral: f32) -> f32 {
        let d = lateral.abs();
        if d <= self.width {
            self.on_road(d)
        } else {
            self.off_road(d)
        }
    }
}

impl CostFunction for RoadCost {
    fn name(&self) -> &str {
        "road"
    }

    fn output_dim(&self) -> Option<usize> {
        Some(3)
    }

    fn running_cost(&self, y: &[f32], _u: &[f32], _t: usize) -> f32 {
        self.lateral_cost(y[1])
    }

    fn terminal_cost(&self, _y: &[f32]) -> f32 {
        0.0
    }
}
