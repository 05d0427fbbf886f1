//! The full curriculum in one process: tracking pre-training, weight transfer
//! and catching. Compares against catching trained from scratch with the
//! same catching budget.
//!
//! `cargo run --release --example two_stage [tracking_steps] [catching_steps]`
use dexcatch::cli::RunConfig;
use dexcatch::ppo::{train_catching, train_tracking, transfer_to_catching, CatchMode};
use dexcatch::rewards::Stage;

fn main() -> dexcatch::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<u64>().ok());
    let track_steps = args.next().flatten().unwrap_or(1_000_000);
    let catch_steps = args.next().flatten().unwrap_or(500_000);
    let (_, mut cfg) = RunConfig::load(&dexcatch::default_config_dir().join("catch_two_stage.toml"))?;
    let quiet = |_: &dexcatch::ppo::Trainer, _: &dexcatch::ppo::UpdateReport| Ok(());

    cfg.ppo.total_steps = track_steps;
    let tracking = train_tracking(&cfg, CatchMode::TwoStage, quiet)?;
    let ckpt = tracking.checkpoint();
    println!("tracking: {} updates, touch {:.1}%", ckpt.updates, 100.0 * tracking.evaluate(128, &[None])?.touch_rate);

    // Right after transfer the arm behaves exactly as the tracking policy
    // and the hand stays open.
    let transferred = transfer_to_catching(&ckpt)?;
    let env = cfg.env_for(Stage::Catching);
    let start = dexcatch::ppo::evaluate(&transferred, &env, cfg.rewards.catching, &[None], 128, 3, 64)?;
    println!("after transfer: touch {:.1}%, catch {:.1}%", 100.0 * start.touch_rate, 100.0 * start.catch_rate);

    cfg.ppo.total_steps = catch_steps;
    for (name, mode, init) in [("two-stage", CatchMode::TwoStage, Some(&ckpt)), ("one-stage", CatchMode::OneStage, None)] {
        let t = train_catching(&cfg, mode, init, quiet)?;
        let r = t.evaluate(128, &[None])?;
        println!("{name}: touch {:.1}%, catch {:.1}% after {catch_steps} catching steps", 100.0 * r.touch_rate, 100.0 * r.catch_rate);
    }
    Ok(())
}
