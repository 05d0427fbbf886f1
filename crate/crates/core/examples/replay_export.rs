//! Record an episode of a freshly initialized catching policy as JSON lines,
//! read it back and re-derive every step's reward from the stored terms.
//!
//! `cargo run --release --example replay_export [out.jsonl]`
use std::sync::Arc;

use dexcatch::ppo::{net_spec, CatchMode, PolicyNet, PpoConfig};
use dexcatch::rewards::{RewardWeights, Stage};
use dexcatch::simenv::{read_jsonl, write_jsonl, Action, CatchEnv, EnvConfig, ReplayRecord};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dexcatch::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "replay_example.jsonl".into());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let net = PolicyNet::new(net_spec(&PpoConfig::default(), Stage::Catching, CatchMode::OneStage), &mut rng)?;
    let cfg = Arc::new(EnvConfig::default().with_stage(Stage::Catching));
    let weights = RewardWeights::default();
    let mut env = CatchEnv::new(Arc::clone(&cfg), weights)?;

    let mut records = Vec::new();
    for episode in 0..2u64 {
        let mut obs = env.reset(100 + episode)?;
        loop {
            let a = net.act_sampled(&[obs.to_vec()], &mut rng)?.remove(0);
            let action = Action::from_normalized(&a, &cfg.action)?;
            let r = env.step(&action)?;
            records.push(ReplayRecord::capture(&env, episode, &action, &r));
            if r.done {
                break;
            }
            obs = r.observation;
        }
    }
    write_jsonl(std::io::BufWriter::new(std::fs::File::create(&out).map_err(|e| dexcatch::Error::io(&out, e))?), &records)?;

    let back = read_jsonl(std::io::BufReader::new(std::fs::File::open(&out).map_err(|e| dexcatch::Error::io(&out, e))?))?;
    let worst = back
        .iter()
        .map(|r| (r.recompute(&weights).0 - r.reward).abs())
        .fold(0.0, f64::max);
    let ret: f64 = back.iter().map(|r| r.reward).sum();
    println!("wrote {} records to {out}; summed reward {ret:.4}; largest re-derivation error {worst:.1e}", back.len());
    Ok(())
}
