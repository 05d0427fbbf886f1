//! The action low-pass filter on a step and a noisy command, plus a few
//! randomized episode parameter draws.
//!
//! `cargo run --release --example lpf_randomization`
use dexcatch::sim2real::{add_noise, sample_env_params, LowPassFilter, RandomizationRanges};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dexcatch::Result<()> {
    let mut lpf = LowPassFilter::new(0.9, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("step   raw vx   raw vy   filtered vx  filtered vy");
    for t in 1..=15 {
        let raw = add_noise(&mut rng, &[1.0, -0.5], 0.3);
        let y = lpf.apply(&raw)?;
        println!("{t:>4} {:>8.3} {:>8.3} {:>12.3} {:>12.3}", raw[0], raw[1], y[0], y[1]);
    }

    let ranges = RandomizationRanges::default();
    println!("\ngravity  gain(base/arm/hand)   offset  obs sigma  act sigma");
    for _ in 0..5 {
        let p = sample_env_params(&mut rng, &ranges, true);
        println!(
            "{:>7.3}  {:.3}/{:.3}/{:.3}  {:>7} {:>10.4} {:>10.4}",
            p.gravity, p.gain_scale.base, p.gain_scale.arm, p.gain_scale.hand, p.throw_offset, p.obs_sigma, p.act_sigma
        );
    }
    Ok(())
}
