use mppi_core::costs::{CircleTrackCost, CostFunction, RoadCost, RoadCostParams};
use mppi_core::dynamics::{DiffDrive, DiffDriveParams, DoubleIntegrator2D, Dynamics, Unicycle};
use mppi_core::engine::{compute_weights, weighted_update, EngineConfig, RolloutEngine, RolloutRequest, StrategyChoice};
use mppi_core::feedback::{FeedbackController, Pid, PidGains};
use mppi_core::sampling::{GaussianSampler, GaussianSamplerConfig, SamplingDistribution};
use mppi_core::{ControlTrajectory, ControlVector, ModelDims, StateVector};
use proptest::prelude::*;

fn costs_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e4, 1..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_are_a_distribution(costs in costs_strategy(16384), lambda in 0.01f64..100.0) {
        let w = compute_weights(&costs, lambda).unwrap();
        let sum: f64 = w.weights.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-5, "sum {sum}");
        prop_assert!(w.weights.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert!(w.normalizer >= 1.0);
        // the minimum-cost sample carries the largest weight
        let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let wmax = w.weights.iter().copied().fold(0.0, f64::max);
        let i = costs.iter().position(|&c| c == best).unwrap();
        prop_assert_eq!(w.weights[i], wmax);
    }

    #[test]
    fn shifting_costs_keeps_weights(costs in costs_strategy(512), lambda in 0.1f64..10.0, c in -1e6f64..1e6) {
        let a = compute_weights(&costs, lambda).unwrap();
        let shifted: Vec<f64> = costs.iter().map(|x| x + c).collect();
        let b = compute_weights(&shifted, lambda).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            prop_assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn dynamics_are_pure(x in prop::array::uniform4(-5f32..5.0), u in prop::array::uniform2(-3f32..3.0), dt in 1e-3f32..0.1) {
        let m = DoubleIntegrator2D;
        let xs = StateVector::new(x.to_vec()).unwrap();
        let us = ControlVector::new(u.to_vec()).unwrap();
        prop_assert_eq!(m.step(&xs, &us, dt).unwrap(), m.step(&xs, &us, dt).unwrap());
        let xs3 = StateVector::new(x[..3].to_vec()).unwrap();
        prop_assert_eq!(Unicycle.step(&xs3, &us, dt).unwrap(), Unicycle.step(&xs3, &us, dt).unwrap());
    }

    #[test]
    fn diff_drive_motion_stays_within_bounds(
        controls in prop::collection::vec(prop::array::uniform2(-5f32..5.0), 1..60),
        theta in -3f32..3.0,
    ) {
        let p = DiffDriveParams::default();
        let m = DiffDrive::new(p);
        let dt = 0.05f32;
        let mut x = StateVector::new(vec![0.0, 0.0, theta]).unwrap();
        for u in controls {
            let (next, _) = m.step(&x, &ControlVector::new(u.to_vec()).unwrap(), dt).unwrap();
            let dist = ((next[0] - x[0]).powi(2) + (next[1] - x[1]).powi(2)).sqrt();
            let speed_bound = p.v_max.abs().max(p.v_min.abs()) as f32;
            prop_assert!(dist <= speed_bound * dt * (1.0 + 1e-5));
            let mut turn = next[2] - x[2];
            if turn > std::f32::consts::PI { turn -= 2.0 * std::f32::consts::PI; }
            if turn < -std::f32::consts::PI { turn += 2.0 * std::f32::consts::PI; }
            prop_assert!(turn >= p.omega_min as f32 * dt - 1e-6 && turn <= p.omega_max as f32 * dt + 1e-6);
            x = next;
        }
    }

    #[test]
    fn circle_cost_zero_on_target_set(r in 2.0f32..2.12, phi in -3.14f32..3.14, outward in any::<bool>()) {
        // speed 2 with tangential part 4 / r keeps the angular momentum at 4
        let v_t = 4.0 / r;
        let v_r = (4.0 - v_t * v_t).max(0.0).sqrt() * if outward { 1.0 } else { -1.0 };
        let (s, c) = phi.sin_cos();
        let y = [r * c, r * s, v_r * c - v_t * s, v_r * s + v_t * c];
        let v = CircleTrackCost::default().running_cost(&y, &[0.0, 0.0], 0);
        prop_assert!(v.abs() < 1e-4, "{v}");
    }

    #[test]
    fn circle_cost_penalizes_off_track(r in prop_oneof![0.0f32..1.87, 2.13f32..10.0], phi in -3.14f32..3.14, v in prop::array::uniform2(-5f32..5.0)) {
        let (s, c) = phi.sin_cos();
        let y = [r * c, r * s, v[0], v[1]];
        prop_assert!(CircleTrackCost::default().running_cost(&y, &[0.0, 0.0], 0) >= 1000.0);
    }

    #[test]
    fn road_cost_is_continuous(width in 0.1f64..5.0, lin in 0.0f64..10.0, quad in 0.0f64..10.0) {
        let cost = RoadCost::new(RoadCostParams { road_width: width, linear_coeff: lin, quadratic_coeff: quad });
        let w = width as f32;
        let at = cost.lateral_cost(w);
        let above = cost.lateral_cost(w.next_up());
        prop_assert!((at - above).abs() <= 1e-4 * at.abs().max(1.0));
        prop_assert!((at - lin as f32 * w).abs() <= 1e-5 * at.abs().max(1.0));
    }

    #[test]
    fn proportional_feedback_is_linear(e in prop::collection::vec(-3f32..3.0, 4), alpha in -4f32..4.0) {
        let dims = ModelDims::new(4, 2, 4).unwrap();
        let mut gains = PidGains::zeros(dims, 0.02);
        gains.kp = vec![1.5, 0.0, -0.5, 0.0, 0.0, 2.0, 0.0, 0.25];
        let pid = Pid::new(dims, gains).unwrap();
        let zero = StateVector::zeros(4);
        let fb = |err: &[f32]| {
            let mut st = pid.initial_state();
            pid.feedback(&zero, &StateVector::new(err.to_vec()).unwrap(), &mut st).unwrap()
        };
        let base = fb(&e);
        let scaled = fb(&e.iter().map(|v| alpha * v).collect::<Vec<_>>());
        for i in 0..2 {
            prop_assert!((scaled[i] - alpha * base[i]).abs() <= 1e-4 * (1.0 + base[i].abs() * alpha.abs()));
        }
    }
}

#[test]
fn noise_is_deterministic_per_seed() {
    let mean = ControlTrajectory::zeros(0.02, 30, 2).unwrap();
    let cfg = GaussianSamplerConfig { seed: 99, zero_mean_fraction: 0.1, ..Default::default() };
    let a = GaussianSampler::new(cfg.clone()).unwrap().generate_samples(&mean, 200, 4).unwrap();
    let b = GaussianSampler::new(cfg).unwrap().generate_samples(&mean, 200, 4).unwrap();
    for m in 0..200 {
        assert_eq!(a.sample_noise(m), b.sample_noise(m));
        assert_eq!(a.kind(m), b.kind(m));
    }
}

#[test]
fn parallel_fused_beats_serial_extrapolation() {
    let engine = RolloutEngine::new(EngineConfig { workers: 2, strategy: StrategyChoice::Fused, ..Default::default() }).unwrap();
    let sampler = GaussianSampler::new(GaussianSamplerConfig { std: vec![1.0, 1.0], ..Default::default() }).unwrap();
    let mean = ControlTrajectory::zeros(0.02, 40, 2).unwrap();
    let x0 = [StateVector::new(vec![2.0, 0.0, 0.0, 2.0]).unwrap()];
    let cost = CircleTrackCost::default();
    let time = |m: usize| {
        let noise = sampler.generate_samples(&mean, m, 0).unwrap();
        let means = [mean.clone()];
        let req = RolloutRequest {
            initial_states: &x0,
            means: &means,
            noise: &noise,
            dynamics: &DoubleIntegrator2D,
            cost: &cost,
            lambda: 1.0,
            importance_sampling: true,
        };
        engine.rollout(&req).unwrap();
        let mut best = f64::INFINITY;
        for _ in 0..5 {
            let start = std::time::Instant::now();
            engine.rollout(&req).unwrap();
            best = best.min(start.elapsed().as_secs_f64());
        }
        best
    };
    let one = time(1);
    let many = time(4096);
    assert!(many < 4096.0 * one, "{many} vs {}", 4096.0 * one);
}

#[test]
fn weighted_update_is_a_convex_combination_of_samples() {
    let mean = ControlTrajectory::new(0.02, 2, (0..40).map(|i| (i as f32 * 0.3).sin()).collect()).unwrap();
    let sampler = GaussianSampler::new(GaussianSamplerConfig::default()).unwrap();
    let batch = sampler.generate_samples(&mean, 50, 1).unwrap();
    let costs: Vec<f64> = (0..50).map(|m| ((m * 37) % 11) as f64).collect();
    let w = compute_weights(&costs, 2.0).unwrap();
    let updated = weighted_update(&mean, &batch, &w.weights).unwrap();
    for t in 0..20 {
        for c in 0..2 {
            let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
            for m in 0..50 {
                let v = mean.at(t)[c] + batch.noise(m, t)[c];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let u = updated.at(t)[c];
            assert!(u >= lo - 1e-5 && u <= hi + 1e-5);
        }
    }
}
