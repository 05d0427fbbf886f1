use std::sync::Arc;

use dexcatch::rewards::{RewardWeights, Stage};
use dexcatch::simenv::{
    ballistic_landing, build_observation, integrate_flight, CatchEnv, EnvConfig, StepResult, FULL_ACTION_DIM,
};
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn env(stage: Stage) -> CatchEnv {
    CatchEnv::new(Arc::new(EnvConfig::default().with_stage(stage)), RewardWeights::default()).unwrap()
}

fn actions(seed: u64, n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..FULL_ACTION_DIM).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

fn run(env: &mut CatchEnv, seed: u64, acts: &[Vec<f64>]) -> Vec<StepResult> {
    env.reset(seed).unwrap();
    let mut out = Vec::new();
    for a in acts {
        let r = env.step_normalized(a).unwrap();
        let done = r.done;
        out.push(r);
        if done {
            break;
        }
    }
    out
}

#[test]
fn horizon_is_sixty_three_steps() {
    let cfg = EnvConfig::default();
    assert_eq!(cfg.horizon_steps, (2.5f64 * 25.0).ceil() as usize);
    assert!((cfg.control_dt() - 0.04).abs() < 1e-15);
    for stage in [Stage::Tracking, Stage::Catching] {
        let mut e = env(stage);
        for seed in 0..10 {
            let steps = run(&mut e, seed, &actions(seed, 200));
            assert!(steps.len() <= 63);
            assert!(steps.last().unwrap().done);
        }
    }
}

#[test]
fn energy_is_conserved_without_damping() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let mut p = Vector3::new(rng.random_range(1.0..3.0), rng.random_range(-1.0..1.0), rng.random_range(1.0..2.0));
        let mut v = Vector3::new(rng.random_range(-5.0..0.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..5.0));
        let (g, m) = (9.81, 0.3);
        let energy = |p: &Vector3<f64>, v: &Vector3<f64>| 0.5 * m * v.norm_squared() + m * g * p.z;
        let e0 = energy(&p, &v);
        for _ in 0..1250 {
            integrate_flight(&mut p, &mut v, g, 0.0, 0.002);
        }
        assert!(((energy(&p, &v) - e0) / e0).abs() < 1e-3);
    }
}

#[test]
fn flight_matches_the_projectile_closed_form() {
    let p0 = Vector3::new(2.5, 0.3, 1.5);
    let v0 = Vector3::new(-2.0, -0.2, 3.0);
    let (mut p, mut v) = (p0, v0);
    let g = 9.81;
    for k in 1..=1000 {
        integrate_flight(&mut p, &mut v, g, 0.0, 0.002);
        let t = k as f64 * 0.002;
        let expect = p0 + v0 * t + Vector3::new(0.0, 0.0, -0.5 * g * t * t);
        assert!((p - expect).norm() < 1e-9);
    }
    let ([x, y], t) = ballistic_landing(&p0, &v0, g);
    let disc = v0.z * v0.z + 2.0 * g * p0.z;
    let t_exact = (v0.z + disc.sqrt()) / g;
    assert!((t - t_exact).abs() < 1e-12);
    assert!((x - (p0.x + v0.x * t_exact)).abs() < 1e-12);
    assert!((y - (p0.y + v0.y * t_exact)).abs() < 1e-12);
}

#[test]
fn noise_does_not_change_the_episode_draw() {
    let mut quiet = EnvConfig::default();
    quiet.randomization.obs_sigma = dexcatch::sim2real::Range::new(0.0, 0.0);
    quiet.randomization.act_sigma = dexcatch::sim2real::Range::new(0.0, 0.0);
    let mut loud = EnvConfig::default();
    loud.randomization.obs_sigma = dexcatch::sim2real::Range::new(0.05, 0.05);
    loud.randomization.act_sigma = dexcatch::sim2real::Range::new(0.1, 0.1);
    let mut a = CatchEnv::new(Arc::new(quiet), RewardWeights::default()).unwrap();
    let mut b = CatchEnv::new(Arc::new(loud), RewardWeights::default()).unwrap();
    for seed in 0..20 {
        a.reset(seed).unwrap();
        b.reset(seed).unwrap();
        let (pa, pb) = (&a.world().params, &b.world().params);
        assert_eq!(pa.domain.gravity, pb.domain.gravity);
        assert_eq!(pa.domain.gain_scale, pb.domain.gain_scale);
        assert_eq!(pa.domain.throw_offset, pb.domain.throw_offset);
        assert_eq!(pa.object, pb.object);
        assert_eq!(pa.release_position, pb.release_position);
        assert_eq!(pa.release_velocity, pb.release_velocity);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn same_seed_same_trajectory(seed in any::<u64>(), action_seed in any::<u64>(), catching in any::<bool>()) {
        let stage = if catching { Stage::Catching } else { Stage::Tracking };
        let acts = actions(action_seed, 63);
        let a = run(&mut env(stage), seed, &acts);
        let b = run(&mut env(stage), seed, &acts);
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.reward.to_bits(), y.reward.to_bits());
            prop_assert_eq!(x.observation.to_vec().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            y.observation.to_vec().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(x.outcome, y.outcome);
        }
    }

    #[test]
    fn outcome_lattice(seed in any::<u64>(), action_seed in any::<u64>()) {
        let mut e = env(Stage::Catching);
        let steps = run(&mut e, seed, &actions(action_seed, 63));
        let mut prev = f64::INFINITY;
        for r in &steps {
            prop_assert!(r.outcome.closest_distance <= prev);
            prop_assert!(!r.outcome.caught || r.outcome.touched);
            prev = r.outcome.closest_distance;
        }
    }

    #[test]
    fn translating_the_world_keeps_observations(seed in any::<u64>(), steps in 0usize..40, dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
        let mut e = env(Stage::Catching);
        run(&mut e, seed, &actions(seed ^ 1, steps));
        let cfg = e.config().clone();
        let mut w1 = e.world().clone();
        let mut w2 = w1.clone();
        w2.translate(dx, dy);
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(1);
        let o1 = build_observation(&mut w1, &cfg, Stage::Catching, &mut r1).to_vec();
        let o2 = build_observation(&mut w2, &cfg, Stage::Catching, &mut r2).to_vec();
        for (a, b) in o1.iter().zip(&o2) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
