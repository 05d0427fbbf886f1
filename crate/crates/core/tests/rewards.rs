use std::sync::Arc;

use dexcatch::rewards::{total_reward, RewardBreakdown, RewardContext, RewardWeights, Stage};
use dexcatch::simenv::{CatchEnv, EnvConfig, FULL_ACTION_DIM};
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    proptest::array::uniform3(-r..r).prop_map(Vector3::from)
}

fn unit() -> impl Strategy<Value = Vector3<f64>> {
    vec3(1.0).prop_filter("non-zero", |v| v.norm() > 1e-3).prop_map(|v| v.normalize())
}

prop_compose! {
    fn context()(
        object_position in vec3(1.0),
        object_delta in vec3(0.5),
        palm_position in vec3(1.0),
        palm_z in unit(),
        slack in 0.0f64..2.0,
        action in proptest::collection::vec(-1.0f64..1.0, 6..=18),
        touched in any::<bool>(),
        held_duration in 0.0f64..0.04,
        limit_violated in any::<bool>(),
    ) -> RewardContext {
        let d = (palm_position - object_position).norm();
        RewardContext {
            object_position,
            object_delta,
            palm_position,
            palm_z,
            closest_distance: d + slack,
            action,
            touched,
            held_duration,
            limit_violated,
        }
    }
}

fn weights() -> impl Strategy<Value = RewardWeights> {
    proptest::array::uniform7(0.0f64..20.0).prop_map(|w| RewardWeights {
        pos: w[0],
        pre: w[1],
        orient: w[2],
        touch: w[3],
        stab: w[4],
        ctrl: w[5],
        cstr: w[6],
    })
}

proptest! {
    #[test]
    fn term_bounds(ctx in context()) {
        let b = RewardBreakdown::evaluate(&ctx);
        prop_assert!(b.pre > 0.0 && b.pre <= 1.0);
        prop_assert!((-1.0..=1.0).contains(&b.orient));
        prop_assert!(b.touch == 0.0 || b.touch == 1.0);
        prop_assert!(b.cstr == 0.0 || b.cstr == -1.0);
        prop_assert!(b.ctrl >= 0.0);
        prop_assert!(b.stab >= 0.0);
    }

    #[test]
    fn stage_gating_is_exact(ctx in context(), w in weights()) {
        let (track, b) = total_reward(&ctx, &w, Stage::Tracking);
        let no_stab = RewardWeights { stab: 0.0, ..w };
        prop_assert_eq!(track, total_reward(&ctx, &no_stab, Stage::Tracking).0);
        let (catch, _) = total_reward(&ctx, &w, Stage::Catching);
        let no_touch = RewardWeights { touch: 0.0, ..w };
        prop_assert_eq!(catch, total_reward(&ctx, &no_touch, Stage::Catching).0);
        prop_assert_eq!(b, RewardBreakdown::evaluate(&ctx));
    }

    #[test]
    fn total_is_the_weighted_dot_product(ctx in context(), w in weights()) {
        for stage in [Stage::Tracking, Stage::Catching] {
            let (total, b) = total_reward(&ctx, &w, stage);
            let (touch, stab) = match stage {
                Stage::Tracking => (w.touch, 0.0),
                Stage::Catching => (0.0, w.stab),
            };
            let coeff = [w.pos, w.pre, w.orient, touch, stab, -w.ctrl, w.cstr];
            let dot = b.as_array().iter().zip(coeff).fold(0.0, |acc, (r, c)| acc + c * r);
            prop_assert_eq!(total, dot);
        }
    }

    #[test]
    fn positive_progress_telescopes(start in 0.1f64..3.0, steps in proptest::collection::vec(0.0f64..3.0, 1..80)) {
        let mut closest = start;
        let mut gained = 0.0;
        for d in &steps {
            let ctx = RewardContext {
                object_position: Vector3::zeros(),
                object_delta: Vector3::zeros(),
                palm_position: Vector3::new(*d, 0.0, 0.0),
                palm_z: Vector3::z(),
                closest_distance: closest,
                action: vec![0.0; 6],
                touched: false,
                held_duration: 0.0,
                limit_violated: false,
            };
            gained += RewardBreakdown::evaluate(&ctx).pos.max(0.0);
            closest = ctx.updated_closest();
        }
        prop_assert!(gained <= start - closest + 1e-12);
    }
}

#[test]
fn episode_progress_telescopes_in_the_env() {
    for stage in [Stage::Tracking, Stage::Catching] {
        let cfg = Arc::new(EnvConfig::default().with_stage(stage));
        let mut env = CatchEnv::new(cfg, RewardWeights::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for episode in 0..20 {
            env.reset(episode).unwrap();
            let initial = env.outcome().closest_distance;
            let mut gained = 0.0;
            loop {
                let a: Vec<f64> = (0..FULL_ACTION_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
                let r = env.step_normalized(&a).unwrap();
                gained += r.breakdown.pos.max(0.0);
                if r.done {
                    assert!(gained <= initial - r.outcome.closest_distance + 1e-9);
                    break;
                }
            }
        }
    }
}
