//! Receding-horizon harness: state intake, replanning cadence, control
//! publication, and a simulated plant for closed-loop runs.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::controllers::{Controller, ControllerSolution};
use crate::costs::CostFunction;
use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::feedback::{FeedbackController, Pid};
use crate::types::{ControlVector, OutputVector, StateVector};

/// Slack for floating-point time comparisons, in seconds.
const TIME_EPS: f64 = 1e-6;

/// Slack applied to the hold index so knots computed as `k * dt` land on `k`.
const HOLD_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantConfig {
    /// Solves per second of (simulated) time.
    pub replan_rate: f64,
    /// Quantum for shifting the warm-start sequence, in seconds.
    pub dt_min: f64,
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.replan_rate > 0.0 && self.replan_rate.is_finite()) {
            return Err(Error::invalid("replan_rate", format!("must be positive, got {}", self.replan_rate)));
        }
        if !(self.dt_min > 0.0 && self.dt_min.is_finite()) {
            return Err(Error::invalid("dt_min", format!("must be positive, got {}", self.dt_min)));
        }
        Ok(())
    }
}

/// A control published for a given time, read from exactly one solution.
#[derive(Debug, Clone, PartialEq)]
pub struct PublishedControl {
    pub control: ControlVector,
    /// Zero-order-hold index into the solution, clamped to the horizon.
    pub index: usize,
    /// Planned state at `index`, the tracking reference for feedback.
    pub reference: StateVector,
    /// Set when the query time is past the solution's horizon.
    pub stale: bool,
    pub solution_time: f64,
}

#[derive(Debug, Clone)]
struct Snapshot {
    x: StateVector,
    t: f64,
}

#[derive(Debug, Clone)]
struct Published {
    solution: Arc<ControllerSolution>,
    t: f64,
}

impl Published {
    fn control_at(&self, t: f64) -> PublishedControl {
        let sol = &self.solution;
        let horizon = sol.controls.horizon();
        let raw = ((t - self.t) / sol.controls.dt() as f64 + HOLD_EPS).floor().max(0.0) as usize;
        let stale = raw >= horizon;
        let index = raw.min(horizon - 1);
        PublishedControl {
            control: sol.controls.control(index),
            index,
            reference: sol.states[index].clone(),
            stale,
            solution_time: self.t,
        }
    }
}

/// One row of a closed-loop log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub x: StateVector,
    pub u: ControlVector,
    pub running_cost: f32,
}

#[derive(Debug, Clone)]
pub struct TrajectoryLog {
    pub state_names: Vec<String>,
    pub rows: Vec<LogRow>,
    /// Sum of running costs in `f64`.
    pub accumulated_cost: f64,
    pub solves: usize,
    /// Starting state of every solved plan, in solve order.
    pub plan_starts: Vec<StateVector>,
    /// Wall time spent in the controller, summed over solves.
    pub solve_ms: f64,
}

/// Compares everything except wall time.
impl PartialEq for TrajectoryLog {
    fn eq(&self, other: &Self) -> bool {
        self.state_names == other.state_names
            && self.rows == other.rows
            && self.accumulated_cost == other.accumulated_cost
            && self.solves == other.solves
            && self.plan_starts == other.plan_starts
    }
}

impl TrajectoryLog {
    /// Header `t,<state names>,u0..,running_cost`.
    pub fn csv_header(&self) -> String {
        let n_u = self.rows.first().map_or(0, |r| r.u.len());
        let mut cols = vec!["t".to_string()];
        cols.extend(self.state_names.iter().cloned());
        cols.extend((0..n_u).map(|i| format!("u{i}")));
        cols.push("running_cost".into());
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{}", r.t);
            for v in r.x.as_slice().iter().chain(r.u.as_slice()) {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", r.running_cost);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

/// The system being controlled in simulation. Optional Gaussian noise is
/// added to the state after every step; the controller's model never sees it.
pub struct SimulatedSystem {
    dynamics: Arc<dyn Dynamics>,
    state: StateVector,
    disturbance: Option<(Normal<f32>, ChaCha8Rng)>,
}

impl SimulatedSystem {
    pub fn new(dynamics: Arc<dyn Dynamics>, x0: StateVector) -> Result<Self> {
        x0.expect_dim(dynamics.dims().n_x)?;
        Ok(Self { dynamics, state: x0, disturbance: None })
    }

    /// Adds `N(0, std^2)` to every state channel after each step.
    pub fn with_disturbance(mut self, std: f32, seed: u64) -> Result<Self> {
        if !(std >= 0.0 && std.is_finite()) {
            return Err(Error::invalid("disturbance_std", format!("must be non-negative, got {std}")));
        }
        let normal = Normal::new(0.0, std).map_err(|e| Error::invalid("disturbance_std", e.to_string()))?;
        self.disturbance = (std > 0.0).then(|| (normal, ChaCha8Rng::seed_from_u64(seed)));
        Ok(self)
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn dynamics(&self) -> &Arc<dyn Dynamics> {
        &self.dynamics
    }

    /// Advances one step and returns the output computed before noise.
    pub fn step(&mut self, u: &ControlVector, dt: f32) -> Result<OutputVector> {
        let (mut next, y) = self.dynamics.step(&self.state, u, dt)?;
        if let Some((normal, rng)) = &mut self.disturbance {
            let noisy: Vec<f32> = next.as_slice().iter().map(|v| v + normal.sample(rng)).collect();
            next = StateVector::new(noisy)?;
        }
        self.state = next;
        Ok(y)
    }
}

/// Wraps a controller with a state snapshot and a published solution.
/// `update_state` and `run_control_iteration` may run on different threads.
pub struct Plant<C: Controller, F: FeedbackController = Pid> {
    config: PlantConfig,
    controller: Mutex<C>,
    feedback: Mutex<Option<F>>,
    cost: Arc<dyn CostFunction>,
    snapshot: Mutex<Option<Snapshot>>,
    published: Mutex<Option<Published>>,
}

impl<C: Controller> Plant<C, Pid> {
    pub fn new(controller: C, config: PlantConfig) -> Result<Self> {
        Self::build(controller, None, config)
    }
}

impl<C: Controller, F: FeedbackController> Plant<C, F> {
    /// Plant that adds `feedback(x, planned state)` to every published control.
    pub fn with_feedback(controller: C, feedback: F, config: PlantConfig) -> Result<Self> {
        let dims = controller.dims();
        if feedback.dims().n_x != dims.n_x || feedback.dims().n_u != dims.n_u {
            return Err(Error::DimensionMismatch {
                what: "feedback n_u x n_x",
                expected: dims.n_u * dims.n_x,
                actual: feedback.dims().n_u * feedback.dims().n_x,
            });
        }
        Self::build(controller, Some(feedback), config)
    }

    fn build(controller: C, feedback: Option<F>, config: PlantConfig) -> Result<Self> {
        config.validate()?;
        let cost = controller.cost().clone();
        Ok(Self {
            config,
            controller: Mutex::new(controller),
            feedback: Mutex::new(feedback),
            cost,
            snapshot: Mutex::new(None),
            published: Mutex::new(None),
        })
    }

    pub fn config(&self) -> &PlantConfig {
        &self.config
    }

    /// Runs `f` with exclusive access to the controller.
    pub fn with_controller<R>(&self, f: impl FnOnce(&mut C) -> R) -> R {
        f(&mut self.controller.lock().unwrap())
    }

    pub fn into_controller(self) -> C {
        self.controller.into_inner().unwrap()
    }

    /// Latest solution and its timestamp.
    pub fn latest_solution(&self) -> Option<(Arc<ControllerSolution>, f64)> {
        self.published.lock().unwrap().as_ref().map(|p| (p.solution.clone(), p.t))
    }

    /// Current snapshot time, if any.
    pub fn current_time(&self) -> Option<f64> {
        self.snapshot.lock().unwrap().as_ref().map(|s| s.t)
    }

    /// Stores a new state snapshot and returns the control published for
    /// `t`, or `None` before the first solve.
    pub fn update_state(&self, x: StateVector, t: f64) -> Result<Option<PublishedControl>> {
        x.expect_dim(self.controller.lock().unwrap().dims().n_x)?;
        if !t.is_finite() {
            return Err(Error::invalid("t", "must be finite"));
        }
        {
            let mut snap = self.snapshot.lock().unwrap();
            if let Some(s) = snap.as_ref() {
                if t < s.t - TIME_EPS {
                    return Err(Error::StaleState { t, current: s.t });
                }
            }
            *snap = Some(Snapshot { x, t });
        }
        Ok(self.control_at(t))
    }

    /// Zero-order-hold control from the latest solution.
    pub fn control_at(&self, t: f64) -> Option<PublishedControl> {
        self.published.lock().unwrap().as_ref().map(|p| p.control_at(t))
    }

    /// Shifts the warm start by the time since the last solve, solves from
    /// the latest snapshot, and publishes the result.
    pub fn run_control_iteration(&self) -> Result<Arc<ControllerSolution>> {
        let snap = self.snapshot.lock().unwrap().clone().ok_or(Error::NoSnapshot)?;
        let mut controller = self.controller.lock().unwrap();
        let last = self.published.lock().unwrap().as_ref().map(|p| p.t);
        if let Some(t_prev) = last {
            controller.shift_control_sequence((snap.t - t_prev).max(0.0), self.config.dt_min);
        }
        let solution = Arc::new(controller.compute_control(&snap.x)?);
        drop(controller);
        if let Some(fb) = self.feedback.lock().unwrap().as_mut() {
            fb.compute_feedback_gains(&solution.states)?;
        }
        *self.published.lock().unwrap() = Some(Published { solution: solution.clone(), t: snap.t });
        Ok(solution)
    }

    /// Closed loop in simulated time for `duration` seconds at the
    /// controller's `dt`, replanning every `1 / replan_rate` seconds.
    pub fn run_control_loop(&self, sim: &mut SimulatedSystem, duration: f64) -> Result<TrajectoryLog> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::invalid("duration", format!("must be positive, got {duration}")));
        }
        let dt = self.controller.lock().unwrap().dt();
        self.run_control_steps(sim, (duration / dt as f64 + HOLD_EPS).floor() as usize)
    }

    /// Closed loop for a fixed number of controller time steps.
    pub fn run_control_steps(&self, sim: &mut SimulatedSystem, steps: usize) -> Result<TrajectoryLog> {
        let dt = self.controller.lock().unwrap().dt();
        let period = 1.0 / self.config.replan_rate;
        let mut fb_state = self.feedback.lock().unwrap().as_ref().map(|f| f.initial_state());
        let mut log = TrajectoryLog {
            state_names: sim.dynamics().state_names().iter().map(|s| s.to_string()).collect(),
            rows: Vec::with_capacity(steps),
            accumulated_cost: 0.0,
            solves: 0,
            plan_starts: Vec::new(),
            solve_ms: 0.0,
        };
        for k in 0..steps {
            let t = k as f64 * dt as f64;
            let x = sim.state().clone();
            self.update_state(x.clone(), t)?;
            if t + TIME_EPS >= log.solves as f64 * period {
                let sol = self.run_control_iteration()?;
                log.solves += 1;
                log.solve_ms += sol.solve_ms;
                log.plan_starts.push(sol.states[0].clone());
            }
            let published = self.control_at(t).ok_or(Error::NoSnapshot)?;
            let mut u = published.control;
            if let (Some(fb), Some(state)) = (self.feedback.lock().unwrap().as_ref(), fb_state.as_mut()) {
                let k = fb.feedback(&x, &published.reference, state)?;
                u = ControlVector::new(u.as_slice().iter().zip(k.as_slice()).map(|(a, b)| a + b).collect())?;
            }
            let y = sim.step(&u, dt).map_err(|e| Error::SimulationDiverged { step: k, source: Box::new(e) })?;
            let c = self.cost.running_cost(y.as_slice(), u.as_slice(), 0);
            if !c.is_finite() {
                return Err(Error::SimulationDiverged {
                    step: k,
                    source: Box::new(Error::NonFinite { what: "running cost", index: k }),
                });
            }
            log.accumulated_cost += c as f64;
            log.rows.push(LogRow { t, x, u, running_cost: c });
        }
        Ok(log)
    }
}

/// Accumulated running cost of holding zero control from `x0` for `steps`.
pub fn zero_control_cost(dynamics: &dyn Dynamics, cost: &dyn CostFunction, x0: &StateVector, dt: f32, steps: usize) -> Result<f64> {
    let u = ControlVector::zeros(dynamics.dims().n_u);
    let mut x = x0.clone();
    let mut total = 0.0;
    for k in 0..steps {
        let (next, y) = dynamics.step(&x, &u, dt).map_err(|e| Error::SimulationDiverged { step: k, source: Box::new(e) })?;
        total += cost.running_cost(y.as_slice(), u.as_slice(), 0) as f64;
        x = next;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::{MppiConfig, MppiController, ControllerCore, TailFill};
    use crate::costs::{CircleTrackCost, ZeroCost};
    use crate::dynamics::DoubleIntegrator2D;
    use crate::engine::{EngineConfig, RolloutEngine, StrategyChoice};
    use crate::feedback::PidGains;
    use crate::sampling::{GaussianSampler, GaussianSamplerConfig};
    use crate::types::ModelDims;

    /// `xdot = 0` with two states and one control.
    struct Frozen;

    impl Dynamics for Frozen {
        fn name(&self) -> &str {
            "frozen"
        }
        fn dims(&self) -> ModelDims {
            ModelDims { n_x: 2, n_u: 1, n_y: 2 }
        }
        fn state_names(&self) -> &'static [&'static str] {
            &["A", "B"]
        }
        fn derivative_into(&self, _x: &[f32], _u: &[f32], xdot: &mut [f32]) {
            xdot.fill(0.0);
        }
    }

    fn mppi(dynamics: Arc<dyn Dynamics>, cost: Arc<dyn CostFunction>, m: usize, horizon: usize, seed: u64) -> MppiController {
        let n_u = dynamics.dims().n_u;
        let sampler = GaussianSampler::new(GaussianSamplerConfig { std: vec![1.0; n_u], seed, ..Default::default() }).unwrap();
        let engine = RolloutEngine::new(EngineConfig { strategy: StrategyChoice::Fused, ..Default::default() }).unwrap();
        let cfg = MppiConfig { num_samples: m, iterations: 1, lambda: 1.0, dt: 0.02, horizon, tail_fill: TailFill::RepeatLast };
        MppiController::new(ControllerCore::new(dynamics, cost, Arc::new(sampler), Arc::new(engine), cfg).unwrap())
    }

    fn circle_plant(m: usize, seed: u64, replan_rate: f64) -> Plant<MppiController> {
        let c = mppi(Arc::new(DoubleIntegrator2D), Arc::new(CircleTrackCost::default()), m, 20, seed);
        Plant::new(c, PlantConfig { replan_rate, dt_min: 0.02 }).unwrap()
    }

    fn x0() -> StateVector {
        StateVector::new(vec![2.0, 0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn hold_indexing_and_staleness() {
        let plant = circle_plant(16, 0, 50.0);
        assert!(plant.update_state(x0(), 0.0).unwrap().is_none());
        let sol = plant.run_control_iteration().unwrap();
        let p = plant.update_state(x0(), 0.0).unwrap().unwrap();
        assert_eq!((p.index, p.stale), (0, false));
        assert_eq!(p.control, sol.controls.control(0));
        let p = plant.update_state(x0(), 0.05).unwrap().unwrap();
        assert_eq!(p.index, 2);
        assert_eq!(p.reference, sol.states[2]);
        let p = plant.update_state(x0(), 0.06).unwrap().unwrap();
        assert_eq!(p.index, 3);
        let p = plant.update_state(x0(), 1.0).unwrap().unwrap();
        assert!(p.stale);
        assert_eq!(p.control, sol.controls.control(19));
    }

    #[test]
    fn stale_and_missing_snapshot_rejected() {
        let plant = circle_plant(8, 0, 50.0);
        assert_eq!(plant.run_control_iteration().unwrap_err(), Error::NoSnapshot);
        plant.update_state(x0(), 1.0).unwrap();
        assert!(matches!(plant.update_state(x0(), 0.5), Err(Error::StaleState { .. })));
        assert!(plant.update_state(StateVector::zeros(3), 2.0).is_err());
    }

    #[test]
    fn iteration_shifts_by_quantized_elapsed_time() {
        let plant = circle_plant(32, 3, 50.0);
        plant.update_state(x0(), 0.0).unwrap();
        plant.run_control_iteration().unwrap();
        plant.update_state(x0(), 0.05).unwrap();
        let second = plant.run_control_iteration().unwrap();
        let probe = |shift: f64| {
            let mut c = mppi(Arc::new(DoubleIntegrator2D), Arc::new(CircleTrackCost::default()), 32, 20, 3);
            c.compute_control(&x0()).unwrap();
            c.shift_control_sequence(shift, 0.02);
            c.compute_control(&x0()).unwrap()
        };
        assert!(second.same_plan(&probe(0.04)));
        assert!(!second.same_plan(&probe(0.06)));
    }

    #[test]
    fn identical_snapshots_and_seeds_give_identical_solutions() {
        let a = circle_plant(64, 11, 50.0);
        let b = circle_plant(64, 11, 50.0);
        a.update_state(x0(), 0.0).unwrap();
        b.update_state(x0(), 0.0).unwrap();
        assert!(a.run_control_iteration().unwrap().same_plan(&b.run_control_iteration().unwrap()));
    }

    #[test]
    fn frozen_system_stays_put() {
        let c = mppi(Arc::new(Frozen), Arc::new(ZeroCost), 16, 10, 0);
        let plant = Plant::new(c, PlantConfig { replan_rate: 10.0, dt_min: 0.02 }).unwrap();
        let start = StateVector::new(vec![0.5, -1.5]).unwrap();
        let mut sim = SimulatedSystem::new(Arc::new(Frozen), start.clone()).unwrap();
        let log = plant.run_control_loop(&mut sim, 1.0).unwrap();
        assert_eq!(log.rows.len(), 50);
        assert!(log.rows.iter().all(|r| r.x == start));
        assert_eq!(sim.state(), &start);
        assert_eq!(log.solves, 10);
        assert_eq!(log.csv_header(), "t,A,B,u0,running_cost");
        assert_eq!(log.to_csv().lines().count(), 51);
    }

    #[test]
    fn replan_every_step_and_cadence() {
        let plant = circle_plant(16, 2, 50.0);
        let mut sim = SimulatedSystem::new(Arc::new(DoubleIntegrator2D), x0()).unwrap();
        let log = plant.run_control_loop(&mut sim, 0.4).unwrap();
        assert_eq!(log.rows.len(), 20);
        assert_eq!(log.solves, 20);
        for (rate, duration) in [(7.0, 1.0), (12.5, 0.8), (3.0, 2.0)] {
            let plant = circle_plant(16, 2, rate);
            let mut sim = SimulatedSystem::new(Arc::new(DoubleIntegrator2D), x0()).unwrap();
            let log = plant.run_control_loop(&mut sim, duration).unwrap();
            let expected = (duration * rate).floor() as i64;
            assert!((log.solves as i64 - expected).abs() <= 1, "{} vs {expected}", log.solves);
        }
    }

    #[test]
    fn closed_loop_is_reproducible_and_beats_zero_control() {
        let run = || {
            let plant = circle_plant(256, 4, 50.0);
            let mut sim = SimulatedSystem::new(Arc::new(DoubleIntegrator2D), x0()).unwrap();
            plant.run_control_loop(&mut sim, 2.0).unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        let zero = zero_control_cost(&DoubleIntegrator2D, &CircleTrackCost::default(), &x0(), 0.02, 100).unwrap();
        assert!(a.accumulated_cost < zero, "{} vs {zero}", a.accumulated_cost);
    }

    #[test]
    fn disturbance_is_seeded_and_feedback_applies() {
        let run = |seed| {
            let plant = circle_plant(32, 1, 25.0);
            let mut sim = SimulatedSystem::new(Arc::new(DoubleIntegrator2D), x0()).unwrap().with_disturbance(0.1, seed).unwrap();
            plant.run_control_loop(&mut sim, 0.32).unwrap()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));

        let d = DoubleIntegrator2D.dims();
        let gains = PidGains { kp: vec![1.0; 8], ..PidGains::zeros(d, 0.02) };
        let c = mppi(Arc::new(DoubleIntegrator2D), Arc::new(CircleTrackCost::default()), 32, 20, 1);
        let plant = Plant::with_feedback(c, Pid::new(d, gains).unwrap(), PlantConfig { replan_rate: 25.0, dt_min: 0.02 }).unwrap();
        let mut sim = SimulatedSystem::new(Arc::new(DoubleIntegrator2D), x0()).unwrap().with_disturbance(0.1, 5).unwrap();
        let log = plant.run_control_loop(&mut sim, 0.32).unwrap();
        let (sol, t_sol) = plant.latest_solution().unwrap();
        let last = log.rows.last().unwrap();
        let published = plant.control_at(last.t).unwrap();
        assert_eq!(published.solution_time, t_sol);
        assert_eq!(published.control, sol.controls.control(published.index));
        let e: f32 = published.reference.as_slice().iter().zip(last.x.as_slice()).map(|(r, x)| r - x).sum();
        for ch in 0..2 {
            assert!((last.u[ch] - (published.control[ch] + e)).abs() < 1e-5);
        }
    }

    /// `xdot = 1e10 x`, which overflows within a few steps.
    struct Blowup;

    impl Dynamics for Blowup {
        fn name(&self) -> &str {
            "blowup"
        }
        fn dims(&self) -> ModelDims {
            ModelDims { n_x: 2, n_u: 1, n_y: 2 }
        }
        fn state_names(&self) -> &'static [&'static str] {
            &["A", "B"]
        }
        fn derivative_into(&self, x: &[f32], _u: &[f32], xdot: &mut [f32]) {
            for (d, v) in xdot.iter_mut().zip(x) {
                *d = 1e10 * v;
            }
        }
    }

    #[test]
    fn divergence_reports_step() {
        let c = mppi(Arc::new(Frozen), Arc::new(ZeroCost), 4, 5, 0);
        let plant = Plant::new(c, PlantConfig { replan_rate: 50.0, dt_min: 0.02 }).unwrap();
        let mut sim = SimulatedSystem::new(Arc::new(Blowup), StateVector::new(vec![1.0, 0.0]).unwrap()).unwrap();
        let err = plant.run_control_loop(&mut sim, 1.0).unwrap_err();
        assert!(matches!(err, Error::SimulationDiverged { step: 4, .. }), "{err}");
    }

    #[test]
    fn config_validation() {
        assert!(PlantConfig { replan_rate: 0.0, dt_min: 0.02 }.validate().is_err());
        assert!(PlantConfig { replan_rate: 1.0, dt_min: -1.0 }.validate().is_err());
    }
}
