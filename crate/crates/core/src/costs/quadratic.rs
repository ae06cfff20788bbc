use serde::{Deserialize, Serialize};

use super::CostFunction;

/// `sum_i w_i (y_i - target_i)^2` for both running and terminal cost.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadraticCostParams {
    pub target: Vec<f64>,
    pub weights: Vec<f64>,
    /// Multiplier on the terminal term.
    pub terminal_weight: Option<f64>,
}

impl QuadraticCostParams {
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if self.target.len() != self.weights.len() {
            out.push((
                "weights",
                format!("length {} differs from target length {}", self.weights.len(), self.target.len()),
            ));
        }
        if let Some(i) = self.weights.iter().position(|w| !(*w >= 0.0)) {
            out.push(("weights", format!("entry {i} must be non-negative")));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticCost {
    target: Vec<f32>,
    weights: Vec<f32>,
    terminal_weight: f32,
}

impl QuadraticCost {
    pub fn new(params: &QuadraticCostParams) -> Self {
        Self {
            target: params.target.iter().map(|&v| v as f32).collect(),
            weights: params.weights.iter().map(|&v| v as f32).collect(),
            terminal_weight: params.terminal_weight.unwrap_or(1.0) as f32,
        }
    }

    fn weighted_error(&self, y: &[f32]) -> f32 {
        y.iter()
            .zip(&self.target)
            .zip(&self.weights)
            .map(|((yi, ti), wi)| {
                let e = yi - ti;
                wi * e * e
            })
            .sum()
    }
}

impl CostFunction for QuadraticCost {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn output_dim(&self) -> Option<usize> {
        Some(self.target.len())
    }

    fn running_cost(&self, y: &[f32], _u: &[f32], _t: usize) -> f32 {
        self.weighted_error(y)
    }

    fn terminal_cost(&self, y: &[f32]) -> f32 {
        self.terminal_weight * self.weighted_error(y)
    }
}
