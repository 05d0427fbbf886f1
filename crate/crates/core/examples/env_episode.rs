//! Step one catching episode with a hand-written controller: predict where
//! the object crosses palm height, drive base and palm there and close the
//! hand once the object is close.
//!
//! `cargo run --release --example env_episode [seed]`
use std::sync::Arc;

use dexcatch::rewards::{RewardWeights, Stage};
use dexcatch::simenv::{CatchEnv, EnvConfig, FULL_ACTION_DIM};

fn main() -> dexcatch::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = Arc::new(EnvConfig::default().with_stage(Stage::Catching));
    let mut env = CatchEnv::new(Arc::clone(&cfg), RewardWeights::default())?;
    let mut obs = env.reset(seed)?;
    let p = &env.world().params;
    println!(
        "object {:?} mass {:.2} kg, released at {:.2?}, lands at {:.2?} after {:.2} s",
        p.object.shape.kind(),
        p.object.mass,
        p.release_position,
        p.landing,
        p.flight_time
    );
    let mut ret = 0.0;
    loop {
        let mut a = [0.0; FULL_ACTION_DIM];
        let dt = cfg.control_dt();
        let v: Vec<f64> = (0..3).map(|k| (obs.object[k] - obs.object_prev[k]) / dt).collect();
        // Time until the object falls to palm height.
        let dz = obs.object[2] - obs.ee[2];
        let t = ((v[2] + (v[2] * v[2] + 2.0 * 9.81 * dz).max(0.0).sqrt()) / 9.81).max(0.0);
        let aim = [obs.object[0] + v[0] * t, obs.object[1] + v[1] * t, obs.ee[2]];
        let rel: Vec<f64> = (0..3).map(|k| aim[k] - obs.ee[k]).collect();
        let to_object: f64 = (0..3).map(|k| (obs.object[k] - obs.ee[k]).powi(2)).sum::<f64>().sqrt();
        a[0] = (rel[0] * 3.0).clamp(-1.0, 1.0);
        a[1] = (rel[1] * 3.0).clamp(-1.0, 1.0);
        for k in 0..3 {
            a[2 + k] = (rel[k] * 5.0).clamp(-1.0, 1.0);
        }
        if to_object < 0.08 {
            a[6..].iter_mut().for_each(|h| *h = 1.0);
        }
        let r = env.step_normalized(&a)?;
        ret += r.reward;
        if r.context.touched {
            println!("step {:>2}: touch", env.world().step);
        }
        if r.done {
            let o = r.outcome;
            println!(
                "done after {} steps: return {ret:.3}, closest {:.3} m, touched {}, caught {}, held {} steps",
                env.world().step,
                o.closest_distance,
                o.touched,
                o.caught,
                o.steps_held
            );
            break;
        }
        obs = r.observation;
    }
    Ok(())
}
