//! Reward terms along a scripted approach: the palm closes in on a falling
//! object, touches it and then holds it.
//!
//! `cargo run --release --example reward_terms`
use dexcatch::rewards::{total_reward, RewardBreakdown, RewardContext, RewardWeights, Stage};
use nalgebra::Vector3;

fn main() {
    let weights = RewardWeights::default();
    let palm = Vector3::new(0.6, 0.0, 1.0);
    let mut closest = f64::INFINITY;
    let mut object = Vector3::new(1.2, 0.1, 1.6);
    println!("{:>4} {:>7} {}", "step", "dist", RewardBreakdown::TERMS.map(|t| format!("{t:>8}")).join(""));
    for step in 0..12 {
        let next = object + (palm - object) * 0.3;
        let ctx = RewardContext {
            object_position: next,
            object_delta: next - object,
            palm_position: palm,
            palm_z: Vector3::new(0.0, 0.0, 1.0),
            closest_distance: if closest.is_finite() { closest } else { (palm - object).norm() },
            action: vec![0.1; 18],
            touched: (palm - next).norm() < 0.03,
            held_duration: if step >= 9 { 0.04 } else { 0.0 },
            limit_violated: false,
        };
        let b = RewardBreakdown::evaluate(&ctx);
        let track = total_reward(&ctx, &weights, Stage::Tracking).0;
        let catch = total_reward(&ctx, &weights, Stage::Catching).0;
        println!(
            "{step:>4} {:>7.3} {}   tracking {track:>7.3}  catching {catch:>7.3}",
            ctx.distance(),
            b.as_array().map(|v| format!("{v:>8.3}")).join("")
        );
        closest = ctx.updated_closest();
        object = next;
    }
}
