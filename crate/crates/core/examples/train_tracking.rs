//! Tracking pre-training with the bundled desk profile. Prints one line per
//! ten updates and a final deterministic evaluation.
//!
//! `cargo run --release --example train_tracking [env_steps]`
use dexcatch::cli::RunConfig;
use dexcatch::ppo::{train_tracking, CatchMode};

fn main() -> dexcatch::Result<()> {
    env_logger::init();
    let steps: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300_000);
    let (_, mut cfg) = RunConfig::load(&dexcatch::default_config_dir().join("track.toml"))?;
    cfg.ppo.total_steps = steps;

    let trainer = train_tracking(&cfg, CatchMode::TwoStage, |_, r| {
        if r.update % 10 == 0 {
            println!(
                "update {:>4}  steps {:>8}  return {:>7.3}  touch {:.3}  kl {:.4}",
                r.update, r.env_steps, r.mean_return, r.touch_rate, r.stats.approx_kl
            );
        }
        Ok(())
    })?;
    let report = trainer.evaluate(64, &[None])?;
    println!("deterministic tracking success over 64 episodes: {:.1}%", 100.0 * report.touch_rate);
    trainer.checkpoint().save(std::path::Path::new("tracking_example.ckpt"))?;
    println!("saved tracking_example.ckpt");
    Ok(())
}
