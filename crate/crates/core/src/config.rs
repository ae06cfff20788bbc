//! Scenario files.
//!
//! A scenario is a TOML document. Top-level keys hold the algorithm
//! parameters; `[sampler]`, `[dynamics]`, `[cost]`, `[controller]`,
//! `[engine]` and `[plant]` tables configure the matching modules. The
//! `dynamics`, `cost` and `controller` tables select an implementation with
//! a `kind` key. Every key is optional:
//!
//! ```toml
//! dt = 0.02
//! horizon = 100
//! num_samples = 1024
//! iterations = 1
//! lambda = 1.0
//! control_std = [0.2, 0.2]
//! rng_seed = 0
//! tail_fill = "repeat_last"      # or "zero"
//! # initial_state = [0.0, 0.0, 0.0]
//!
//! [sampler]
//! zero_mean_fraction = 0.0
//! include_mean_sample = false
//! importance_sampling = true
//!
//! [dynamics]
//! kind = "diff_drive"            # unicycle | double_integrator | cartpole
//! wheel_radius = 1.0
//!
//! [cost]
//! kind = "diff_drive_nav"        # circle_track | road | quadratic | zero
//! goal = [4.0, 4.0, 0.0]
//!
//! [controller]
//! kind = "mppi"                  # dmd_mpc | cem | tube_mppi
//!
//! [engine]
//! workers = 0
//! strategy = "auto"
//!
//! [plant]
//! replan_rate = 50.0
//! dt_min = 0.02
//! ```

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::controllers::{
    CemController, Controller, ControllerCore, MppiConfig, MppiController, TailFill, TubeMppiController,
};
use crate::costs::{
    CircleTrackCost, CircleTrackParams, CostFunction, DiffDriveNavCost, DiffDriveNavParams, QuadraticCost,
    QuadraticCostParams, RoadCost, RoadCostParams, ZeroCost,
};
use crate::dynamics::{Cartpole, CartpoleParams, DiffDrive, DiffDriveParams, DoubleIntegrator2D, Dynamics, Unicycle};
use crate::engine::{EngineConfig, RolloutEngine};
use crate::error::Error;
use crate::feedback::{Pid, PidGains};
use crate::plant::PlantConfig;
use crate::sampling::{GaussianSampler, GaussianSamplerConfig};
use crate::types::StateVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DynamicsConfig {
    DiffDrive(DiffDriveParams),
    Unicycle,
    DoubleIntegrator,
    Cartpole(CartpoleParams),
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self::DiffDrive(DiffDriveParams::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostConfig {
    DiffDriveNav(DiffDriveNavParams),
    CircleTrack(CircleTrackParams),
    Road(RoadCostParams),
    Quadratic(QuadraticCostParams),
    Zero,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self::DiffDriveNav(DiffDriveNavParams::default())
    }
}

/// A constant step size or one per timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSize {
    Constant(f64),
    PerTimestep(Vec<f64>),
}

impl StepSize {
    pub fn values(&self) -> Vec<f64> {
        match self {
            StepSize::Constant(g) => vec![*g],
            StepSize::PerTimestep(v) => v.clone(),
        }
    }
}

impl Default for StepSize {
    fn default() -> Self {
        Self::Constant(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmdMpcParams {
    pub step_size: StepSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CemParams {
    pub elite_fraction: f64,
}

impl Default for CemParams {
    fn default() -> Self {
        Self { elite_fraction: 0.1 }
    }
}

/// PID gains are `n_u x n_x`, row-major; an empty list means all zeros.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TubeMppiParams {
    pub kp: Vec<f64>,
    pub ki: Vec<f64>,
    pub kd: Vec<f64>,
    pub integral_limit: Option<f64>,
    /// Re-seed the nominal state from the measurement when the two are
    /// farther apart than this (Euclidean). Unset means never.
    pub reset_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControllerConfig {
    Mppi,
    DmdMpc(DmdMpcParams),
    Cem(CemParams),
    TubeMppi(TubeMppiParams),
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self::Mppi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerOptions {
    pub zero_mean_fraction: f64,
    pub include_mean_sample: bool,
    pub importance_sampling: bool,
    /// Per-timestep standard deviations, overriding `control_std`.
    pub time_varying_std: Option<Vec<Vec<f64>>>,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        let g = GaussianSamplerConfig::default();
        Self {
            zero_mean_fraction: g.zero_mean_fraction,
            include_mean_sample: g.include_mean_sample,
            importance_sampling: g.importance_sampling,
            time_varying_std: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantOptions {
    pub replan_rate: f64,
    pub dt_min: f64,
    /// Standard deviation of state noise injected into the simulated plant.
    pub disturbance_std: f64,
}

impl Default for PlantOptions {
    fn default() -> Self {
        Self { replan_rate: 50.0, dt_min: 0.02, disturbance_std: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dt: f64,
    pub horizon: usize,
    pub num_samples: usize,
    pub iterations: usize,
    pub lambda: f64,
    pub control_std: Vec<f64>,
    pub rng_seed: u64,
    pub tail_fill: TailFill,
    /// Start state for closed-loop runs; the model's zero state when unset.
    pub initial_state: Option<Vec<f64>>,
    pub sampler: SamplerOptions,
    pub dynamics: DynamicsConfig,
    pub cost: CostConfig,
    pub controller: ControllerConfig,
    pub engine: EngineConfig,
    pub plant: PlantOptions,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            horizon: 100,
            num_samples: 1024,
            iterations: 1,
            lambda: 1.0,
            control_std: vec![0.2, 0.2],
            rng_seed: 0,
            tail_fill: TailFill::RepeatLast,
            initial_state: None,
            sampler: SamplerOptions::default(),
            dynamics: DynamicsConfig::default(),
            cost: CostConfig::default(),
            controller: ControllerConfig::default(),
            engine: EngineConfig::default(),
            plant: PlantOptions::default(),
        }
    }
}

/// One violated constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid scenario:\n  {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n  "))]
    Invalid(Vec<FieldError>),
    #[error("building scenario: {0}")]
    Build(String),
}

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        ConfigError::Build(e.to_string())
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    ScenarioConfig::from_toml_str(&text)
}

fn push(out: &mut Vec<FieldError>, field: impl Into<String>, message: impl Into<String>) {
    out.push(FieldError { field: field.into(), message: message.into() });
}

impl ScenarioConfig {
    /// Parses and validates a scenario document.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let errors = config.validate();
        if errors.is_empty() {
            Ok(config)
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ConfigError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()?)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })
    }

    /// Every violated constraint, each naming its field.
    pub fn validate(&self) -> Vec<FieldError> {
        let mut out = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            push(&mut out, "dt", format!("must be positive, got {}", self.dt));
        }
        if self.horizon == 0 {
            push(&mut out, "horizon", "must be at least 1");
        }
        if self.num_samples == 0 {
            push(&mut out, "num_samples", "must be at least 1");
        }
        if self.iterations == 0 {
            push(&mut out, "iterations", "must be at least 1");
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            push(&mut out, "lambda", format!("must be positive, got {}", self.lambda));
        }
        if self.rng_seed > i64::MAX as u64 {
            push(&mut out, "rng_seed", "must fit in a signed 64-bit integer");
        }
        for (field, reason) in self.sampler_config().violations() {
            let field = if field.starts_with("std") { field.replacen("std", "control_std", 1) } else { field };
            let field = if field.starts_with("control_std") { field } else { format!("sampler.{field}") };
            push(&mut out, field, reason);
        }
        if let Some(rows) = &self.sampler.time_varying_std {
            if rows.len() != self.horizon {
                push(&mut out, "sampler.time_varying_std", format!("expected {} rows, got {}", self.horizon, rows.len()));
            }
        }

        let dyn_violations = match &self.dynamics {
            DynamicsConfig::DiffDrive(p) => p.violations(),
            DynamicsConfig::Cartpole(p) => p.violations(),
            _ => Vec::new(),
        };
        for (f, m) in dyn_violations {
            push(&mut out, format!("dynamics.{f}"), m);
        }
        let dims = self.build_dynamics().dims();
        if self.control_std.len() != dims.n_u {
            push(
                &mut out,
                "control_std",
                format!("expected {} entries for {} dynamics, got {}", dims.n_u, self.dynamics_kind(), self.control_std.len()),
            );
        }
        if let Some(x0) = &self.initial_state {
            if x0.len() != dims.n_x {
                push(&mut out, "initial_state", format!("expected {} entries, got {}", dims.n_x, x0.len()));
            } else if x0.iter().any(|v| !v.is_finite()) {
                push(&mut out, "initial_state", "entries must be finite");
            }
        }

        let cost_violations = match &self.cost {
            CostConfig::DiffDriveNav(p) => p.violations(),
            CostConfig::CircleTrack(p) => p.violations(),
            CostConfig::Road(p) => p.violations(),
            CostConfig::Quadratic(p) => p.violations(),
            CostConfig::Zero => Vec::new(),
        };
        for (f, m) in cost_violations {
            push(&mut out, format!("cost.{f}"), m);
        }
        let n_y_needed = match &self.cost {
            CostConfig::DiffDriveNav(_) => Some(3),
            CostConfig::CircleTrack(_) => Some(4),
            CostConfig::Road(_) => Some(3),
            CostConfig::Quadratic(p) => Some(p.target.len()),
            CostConfig::Zero => None,
        };
        if let Some(n) = n_y_needed {
            if n != dims.n_y {
                push(
                    &mut out,
                    "cost.kind",
                    format!("cost expects {n} outputs but {} dynamics produce {}", self.dynamics_kind(), dims.n_y),
                );
            }
        }

        match &self.controller {
            ControllerConfig::Mppi => {}
            ControllerConfig::DmdMpc(p) => {
                let values = p.step_size.values();
                if values.is_empty() {
                    push(&mut out, "controller.step_size", "at least one value is required");
                }
                if values.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
                    push(&mut out, "controller.step_size", "entries must be non-negative");
                }
            }
            ControllerConfig::Cem(p) => {
                if !(p.elite_fraction > 0.0 && p.elite_fraction <= 1.0) {
                    push(&mut out, "controller.elite_fraction", format!("must lie in (0, 1], got {}", p.elite_fraction));
                }
            }
            ControllerConfig::TubeMppi(p) => {
                let n = dims.n_u * dims.n_x;
                for (name, m) in [("kp", &p.kp), ("ki", &p.ki), ("kd", &p.kd)] {
                    if !m.is_empty() && m.len() != n {
                        push(&mut out, format!("controller.{name}"), format!("expected {n} entries (n_u x n_x), got {}", m.len()));
                    }
                }
                if let Some(b) = p.reset_bound {
                    if !(b > 0.0) {
                        push(&mut out, "controller.reset_bound", format!("must be positive, got {b}"));
                    }
                }
            }
        }

        if !(0.0..=1.0).contains(&self.engine.retain_fraction) {
            push(&mut out, "engine.retain_fraction", "must lie in [0, 1]");
        }
        if !(self.plant.replan_rate > 0.0 && self.plant.replan_rate.is_finite()) {
            push(&mut out, "plant.replan_rate", format!("must be positive, got {}", self.plant.replan_rate));
        }
        if !(self.plant.dt_min > 0.0 && self.plant.dt_min.is_finite()) {
            push(&mut out, "plant.dt_min", format!("must be positive, got {}", self.plant.dt_min));
        }
        if !(self.plant.disturbance_std >= 0.0 && self.plant.disturbance_std.is_finite()) {
            push(&mut out, "plant.disturbance_std", "must be non-negative");
        }
        out
    }

    fn dynamics_kind(&self) -> &'static str {
        match self.dynamics {
            DynamicsConfig::DiffDrive(_) => "diff_drive",
            DynamicsConfig::Unicycle => "unicycle",
            DynamicsConfig::DoubleIntegrator => "double_integrator",
            DynamicsConfig::Cartpole(_) => "cartpole",
        }
    }

    pub fn build_dynamics(&self) -> Arc<dyn Dynamics> {
        match &self.dynamics {
            DynamicsConfig::DiffDrive(p) => Arc::new(DiffDrive::new(*p)),
            DynamicsConfig::Unicycle => Arc::new(Unicycle),
            DynamicsConfig::DoubleIntegrator => Arc::new(DoubleIntegrator2D),
            DynamicsConfig::Cartpole(p) => Arc::new(Cartpole::new(*p)),
        }
    }

    pub fn build_cost(&self) -> Result<Arc<dyn CostFunction>, ConfigError> {
        Ok(match &self.cost {
            CostConfig::DiffDriveNav(p) => {
                let map = p.costmap.build().map_err(|e| ConfigError::Build(e.to_string()))?;
                Arc::new(DiffDriveNavCost::new(p, map))
            }
            CostConfig::CircleTrack(p) => Arc::new(CircleTrackCost::new(*p)),
            CostConfig::Road(p) => Arc::new(RoadCost::new(*p)),
            CostConfig::Quadratic(p) => Arc::new(QuadraticCost::new(p)),
            CostConfig::Zero => Arc::new(ZeroCost),
        })
    }

    pub fn sampler_config(&self) -> GaussianSamplerConfig {
        GaussianSamplerConfig {
            std: self.control_std.clone(),
            time_varying_std: self.sampler.time_varying_std.clone(),
            zero_mean_fraction: self.sampler.zero_mean_fraction,
            include_mean_sample: self.sampler.include_mean_sample,
            importance_sampling: self.sampler.importance_sampling,
            seed: self.rng_seed,
        }
    }

    pub fn mppi_config(&self) -> MppiConfig {
        MppiConfig {
            num_samples: self.num_samples,
            iterations: self.iterations,
            lambda: self.lambda as f32,
            dt: self.dt as f32,
            horizon: self.horizon,
            tail_fill: self.tail_fill,
        }
    }

    pub fn plant_config(&self) -> PlantConfig {
        PlantConfig { replan_rate: self.plant.replan_rate, dt_min: self.plant.dt_min }
    }

    pub fn build_engine(&self) -> Result<Arc<RolloutEngine>, ConfigError> {
        Ok(Arc::new(RolloutEngine::new(self.engine.clone())?))
    }

    pub fn initial_state(&self) -> Result<StateVector, ConfigError> {
        match &self.initial_state {
            Some(v) => Ok(StateVector::new(v.iter().map(|x| *x as f32).collect())?),
            None => Ok(self.build_dynamics().zero_state()),
        }
    }

    /// Controller core sharing `engine`.
    pub fn build_core(&self, engine: Arc<RolloutEngine>) -> Result<ControllerCore, ConfigError> {
        let sampler = GaussianSampler::new(self.sampler_config())?;
        Ok(ControllerCore::new(self.build_dynamics(), self.build_cost()?, Arc::new(sampler), engine, self.mppi_config())?)
    }

    /// The configured controller on a shared engine.
    pub fn build_controller(&self, engine: Arc<RolloutEngine>) -> Result<Box<dyn Controller>, ConfigError> {
        let core = self.build_core(engine)?;
        Ok(match &self.controller {
            ControllerConfig::Mppi => Box::new(MppiController::new(core)),
            ControllerConfig::DmdMpc(p) => Box::new(MppiController::with_step_schedule(
                core,
                p.step_size.values().into_iter().map(|g| g as f32).collect(),
            )?),
            ControllerConfig::Cem(p) => Box::new(CemController::new(core, p.elite_fraction)?),
            ControllerConfig::TubeMppi(p) => {
                let pid = self.tube_feedback(p)?;
                Box::new(TubeMppiController::new(core, pid, p.reset_bound.map(|b| b as f32))?)
            }
        })
    }

    fn tube_feedback(&self, p: &TubeMppiParams) -> Result<Pid, ConfigError> {
        let dims = self.build_dynamics().dims();
        let mut gains = PidGains::zeros(dims, self.dt as f32);
        for (dst, src) in [(&mut gains.kp, &p.kp), (&mut gains.ki, &p.ki), (&mut gains.kd, &p.kd)] {
            if !src.is_empty() {
                *dst = src.iter().map(|v| *v as f32).collect();
            }
        }
        gains.integral_limit = p.integral_limit.map(|v| v as f32);
        Ok(Pid::new(dims, gains)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fields(text: &str) -> Vec<String> {
        match ScenarioConfig::from_toml_str(text) {
            Err(ConfigError::Invalid(errs)) => errs.into_iter().map(|e| e.field).collect(),
            other => panic!("expected validation errors, got {other:?}"),
        }
    }

    #[test]
    fn empty_document_gives_defaults() {
        let c = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(c, ScenarioConfig::default());
        assert_eq!(c.dt, 0.02);
        assert_eq!(c.horizon, 100);
        assert_eq!(c.lambda, 1.0);
        assert_eq!(c.control_std, vec![0.2, 0.2]);
        assert!(matches!(c.dynamics, DynamicsConfig::DiffDrive(p) if p.v_max == 0.5 && p.v_min == -0.35));
        assert!(matches!(&c.cost, CostConfig::DiffDriveNav(p) if p.obstacle_cost == 20.0 && p.dist_coeff == 5.0));
        assert!(c.validate().is_empty());
    }

    #[test]
    fn explicit_values_load() {
        let c = ScenarioConfig::from_toml_str("dt = 0.02\nlambda = 1.0\ncontrol_std = [0.2, 0.2]\nhorizon = 100\n").unwrap();
        assert_eq!((c.dt, c.lambda, c.horizon), (0.02, 1.0, 100));
        assert_eq!(c.control_std, vec![0.2, 0.2]);
    }

    #[test]
    fn negative_lambda_names_field() {
        assert_eq!(fields("lambda = -1.0\n"), vec!["lambda"]);
        let err = ScenarioConfig::from_toml_str("lambda = -1.0\n").unwrap_err().to_string();
        assert!(err.contains("lambda"), "{err}");
    }

    #[test]
    fn all_errors_reported() {
        let got = fields("num_samples = 0\nlambda = 0.0\n");
        assert_eq!(got, vec!["num_samples", "lambda"]);
        assert!(ScenarioConfig::from_toml_str("horizon = 1\n").is_ok());
    }

    #[test]
    fn parse_errors_carry_line_and_key() {
        let err = ScenarioConfig::from_toml_str("dt = 0.02\nhorizon = \"long\"\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("horizon"), "{err}");
        let err = ScenarioConfig::from_toml_str("dt = 0.02\n\nnot_a_key = 3\n").unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("not_a_key"), "{err}");
    }

    #[test]
    fn kind_tables_and_cross_checks() {
        let text = r#"
control_std = [1.0, 1.0]
[dynamics]
kind = "double_integrator"
[cost]
kind = "circle_track"
[controller]
kind = "dmd_mpc"
step_size = 0.4
"#;
        let c = ScenarioConfig::from_toml_str(text).unwrap();
        assert_eq!(c.controller, ControllerConfig::DmdMpc(DmdMpcParams { step_size: StepSize::Constant(0.4) }));
        let controller = c.build_controller(c.build_engine().unwrap()).unwrap();
        assert_eq!(controller.name(), "dmd_mpc");
        assert_eq!(controller.horizon(), 100);

        // circle track needs 4 outputs; diff drive has 3
        let got = fields("[cost]\nkind = \"circle_track\"\n");
        assert_eq!(got, vec!["cost.kind"]);
        let got = fields("control_std = [0.2]\n[controller]\nkind = \"cem\"\nelite_fraction = 0.0\n");
        assert_eq!(got, vec!["control_std", "controller.elite_fraction"]);
    }

    #[test]
    fn every_controller_kind_builds() {
        for kind in ["mppi", "dmd_mpc", "cem", "tube_mppi"] {
            let text = format!("num_samples = 16\nhorizon = 10\n[controller]\nkind = \"{kind}\"\n");
            let c = ScenarioConfig::from_toml_str(&text).unwrap();
            let mut ctl = c.build_controller(c.build_engine().unwrap()).unwrap();
            let sol = ctl.compute_control(&c.initial_state().unwrap()).unwrap();
            assert_eq!(sol.controls.horizon(), 10);
        }
    }

    fn arb_config() -> impl Strategy<Value = ScenarioConfig> {
        (
            (1e-4f64..1.0, 1usize..500, 1usize..5000, 1usize..4, 1e-3f64..100.0, 0u64..i64::MAX as u64),
            prop::collection::vec(1e-3f64..5.0, 2),
            prop_oneof![
                Just(ControllerConfig::Mppi),
                (0.0f64..=1.0).prop_map(|g| ControllerConfig::DmdMpc(DmdMpcParams { step_size: StepSize::Constant(g) })),
                prop::collection::vec(0.0f64..=1.0, 1..5)
                    .prop_map(|g| ControllerConfig::DmdMpc(DmdMpcParams { step_size: StepSize::PerTimestep(g) })),
                (1e-3f64..=1.0).prop_map(|f| ControllerConfig::Cem(CemParams { elite_fraction: f })),
                (prop::collection::vec(-5.0f64..5.0, 6), prop::option::of(1e-3f64..10.0)).prop_map(|(kp, b)| {
                    ControllerConfig::TubeMppi(TubeMppiParams { kp, reset_bound: b, ..Default::default() })
                }),
            ],
            (0.0f64..=1.0, any::<bool>(), any::<bool>(), 1e-2f64..200.0, prop::option::of(prop::collection::vec(-3.0f64..3.0, 3))),
        )
            .prop_map(|((dt, horizon, m, iters, lambda, seed), std, controller, (zmf, mean, is, rate, x0))| ScenarioConfig {
                dt,
                horizon,
                num_samples: m,
                iterations: iters,
                lambda,
                control_std: std,
                rng_seed: seed,
                initial_state: x0,
                sampler: SamplerOptions { zero_mean_fraction: zmf, include_mean_sample: mean, importance_sampling: is, time_varying_std: None },
                controller,
                plant: PlantOptions { replan_rate: rate, ..Default::default() },
                ..Default::default()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn toml_round_trip(c in arb_config()) {
            let text = c.to_toml_string().unwrap();
            let back = ScenarioConfig::from_toml_str(&text).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
