use serde::{Deserialize, Serialize};

use super::costmap::{Costmap2D, CostmapSpec};
use super::CostFunction;
use crate::dynamics::wrap_angle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffDriveNavParams {
    /// Goal pose `(x, y, theta)`.
    pub goal: [f64; 3],
    pub dist_coeff: f64,
    pub angle_coeff: f64,
    pub obstacle_cost: f64,
    pub costmap: CostmapSpec,
}

impl Default for DiffDriveNavParams {
    fn default() -> Self {
        Self {
            goal: [4.0, 4.0, 0.0],
            dist_coeff: 5.0,
            angle_coeff: 5.0,
            obstacle_cost: 20.0,
            costmap: CostmapSpec::default(),
        }
    }
}

impl DiffDriveNavParams {
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        [
            ("dist_coeff", self.dist_coeff),
            ("angle_coeff", self.angle_coeff),
            ("obstacle_cost", self.obstacle_cost),
        ]
        .into_iter()
        .filter(|(_, v)| !(*v >= 0.0))
        .map(|(name, v)| (name, format!("must be non-negative, got {v}")))
        .collect()
    }
}

/// Goal-reaching cost for a differential drive on a binary costmap.
///
/// Running cost per step:
/// `dist_coeff * |p - p_goal|^2 + angle_coeff * wrap(theta - theta_goal)^2
///  + obstacle_cost * occupancy(p)`.
/// The terminal cost is the goal part without the obstacle term.
#[derive(Debug, Clone)]
pub struct DiffDriveNavCost {
    goal: [f32; 3],
    dist_coeff: f32,
    angle_coeff: f32,
    obstacle_cost: f32,
    map: Costmap2D,
}

impl DiffDriveNavCost {
    pub fn new(params: &DiffDriveNavParams, map: Costmap2D) -> Self {
        Self {
            goal: params.goal.map(|v| v as f32),
            dist_coeff: params.dist_coeff as f32,
            angle_coeff: params.angle_coeff as f32,
            obstacle_cost: params.obstacle_cost as f32,
            map,
        }
    }

    pub fn costmap(&self) -> &Costmap2D {
        &self.map
    }

    pub fn distance_term(&self, y: &[f32]) -> f32 {
        let dx = y[0] - self.goal[0];
        let dy = y[1] - self.goal[1];
        self.dist_coeff * (dx * dx + dy * dy)
    }

    pub fn angle_term(&self, y: &[f32]) -> f32 {
        let e = wrap_angle(y[2] - self.goal[2]);
        self.angle_coeff * e * e
    }

    pub fn obstacle_term(&self, y: &[f32]) -> f32 {
        self.obstacle_cost * self.map.lookup(y[0], y[1]) as f32
    }
}

impl CostFunction for DiffDriveNavCost {
    fn name(&self) -> &str {
        "diff_drive_nav"
    }

    fn output_dim(&self) -> Option<usize> {
        Some(3)
    }

    fn running_cost(&self, y: &[f32], _u: &[f32], _t: usize) -> f32 {
        self.distance_term(y) + self.angle_term(y) + self.obstacle_term(y)
    }

    fn terminal_cost(&self, y: &[f32]) -> f32 {
        self.distance_term(y) + self.angle_term(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cost_with(params: DiffDriveNavParams) -> DiffDriveNavCost {
        let map = params.costmap.build().unwrap();
        DiffDriveNavCost::new(&params, map)
    }

    #[test]
    fn zero_at_goal_on_free_cell() {
        let c = cost_with(DiffDriveNavParams::default());
        assert_eq!(c.running_cost(&[4.0, 4.0, 0.0], &[0.0, 0.0], 3), 0.0);
        assert_eq!(c.terminal_cost(&[4.0, 4.0, 0.0]), 0.0);
    }

    #[test]
    fn obstacle_and_off_map_penalized() {
        let c = cost_with(DiffDriveNavParams { dist_coeff: 0.0, angle_coeff: 0.0, ..Default::default() });
        assert_eq!(c.running_cost(&[0.0, 0.0, 0.0], &[0.0, 0.0], 0), 20.0);
        assert_eq!(c.running_cost(&[50.0, 0.0, 0.0], &[0.0, 0.0], 0), 20.0);
        assert_eq!(c.running_cost(&[4.0, -4.5, 0.0], &[0.0, 0.0], 0), 0.0);
    }

    proptest! {
        #[test]
        fn terms_decompose_additively(
            x in -6.0f32..6.0, y in -6.0f32..6.0, th in -3.1f32..3.1
        ) {
            let full = cost_with(DiffDriveNavParams::default());
            let out = [x, y, th];
            let total = full.running_cost(&out, &[0.0, 0.0], 0);
            for (zeroed, term) in [
                (DiffDriveNavParams { dist_coeff: 0.0, ..Default::default() }, full.distance_term(&out)),
                (DiffDriveNavParams { angle_coeff: 0.0, ..Default::default() }, full.angle_term(&out)),
                (DiffDriveNavParams { obstacle_cost: 0.0, ..Default::default() }, full.obstacle_term(&out)),
            ] {
                let partial = cost_with(zeroed).running_cost(&out, &[0.0, 0.0], 0);
                prop_assert!((total - partial - term).abs() <= 1e-4 * total.max(1.0));
            }
        }
    }
}
