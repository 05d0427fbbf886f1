//! Evaluate a checkpoint on every object class over several seed groups and
//! print the per-class table. Without an argument a short catching run is
//! trained first.
//!
//! `cargo run --release --example eval_report [checkpoint]`
use dexcatch::cli::{config_digest, summarize, RunConfig};
use dexcatch::ppo::{all_classes, evaluate, Checkpoint, Trainer};

fn main() -> dexcatch::Result<()> {
    let ckpt = match std::env::args().nth(1) {
        Some(path) => Checkpoint::load(std::path::Path::new(&path))?,
        None => {
            let (run, mut cfg) = RunConfig::load(&dexcatch::default_config_dir().join("catch_one_stage.toml"))?;
            cfg.ppo.total_steps = 100_000;
            let mut t = Trainer::new(cfg, run.stage.stage, run.stage.mode, None)?;
            t.train(100_000, |_, _| Ok(()))?;
            t.checkpoint()
        }
    };
    let net = ckpt.net()?;
    let env = ckpt.config.env_for(ckpt.stage);
    let weights = *ckpt.config.rewards.for_stage(ckpt.stage);
    let reports = (0..3)
        .map(|s| evaluate(&net, &env, weights, &all_classes(), 32, 1000 + s, 64))
        .collect::<dexcatch::Result<Vec<_>>>()?;
    let summary = summarize(&reports, &ckpt.mode.to_string(), "-", &config_digest(&ckpt.config));
    print!("{}", summary.table());
    Ok(())
}
