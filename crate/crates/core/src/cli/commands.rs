use std::collections::HashMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::report::{summarize, EvalSummary};
use super::{config_digest, ensure_dir, sha256_hex, write_json, Manifest, RunConfig, Selector};
use crate::error::{Error, Result};
use crate::ppo::{
    all_classes, catching_start, episode_seed, evaluate, Checkpoint, MetricsWriter, TrainConfig, Trainer, UpdateReport,
};
use crate::rewards::Stage;
use crate::simenv::{write_jsonl, Action, CatchEnv, ReplayRecord};

/// Output directory of one stage/mode under a run's root.
pub fn run_dir(out: &Path, sel: Selector) -> PathBuf {
    out.join(format!("{}-{}", sel.stage, sel.mode))
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| Error::io(path, e))?))
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub run: RunConfig,
    pub config: TrainConfig,
    /// Continue from the newest checkpoint in the run directory.
    pub resume: bool,
    /// Tracking checkpoint for two-stage catching; defaults to the final
    /// tracking checkpoint under the same output root.
    pub from: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub dir: PathBuf,
    pub final_checkpoint: PathBuf,
    pub checkpoint_digest: String,
    pub env_steps: u64,
    pub updates: u64,
    pub last: Option<UpdateReport>,
}

/// Checkpoint with the most updates in `dir` (final or periodic).
fn latest_checkpoint(dir: &Path) -> Result<Option<Checkpoint>> {
    let mut candidates = vec![dir.join("final.ckpt")];
    if let Ok(entries) = std::fs::read_dir(dir.join("checkpoints")) {
        for e in entries.flatten() {
            if e.path().extension().is_some_and(|x| x == "ckpt") {
                candidates.push(e.path());
            }
        }
    }
    let mut best: Option<Checkpoint> = None;
    for path in candidates.into_iter().filter(|p| p.exists()) {
        let ckpt = Checkpoint::load(&path)?;
        if best.as_ref().is_none_or(|b| ckpt.updates > b.updates) {
            best = Some(ckpt);
        }
    }
    Ok(best)
}

/// Remove metrics and checkpoints left by an earlier run.
fn clear_run(dir: &Path) -> Result<()> {
    let ckpts = dir.join("checkpoints");
    let mut stale = vec![dir.join("metrics.csv"), dir.join("final.ckpt"), dir.join("manifest.json")];
    for e in std::fs::read_dir(&ckpts).map_err(|e| Error::io(&ckpts, e))?.flatten() {
        if e.path().extension().is_some_and(|x| x == "ckpt") {
            stale.push(e.path());
        }
    }
    for path in stale.into_iter().filter(|p| p.exists()) {
        std::fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Train the selected stage/mode, writing metrics, periodic and final
/// checkpoints and a manifest to [`run_dir`].
pub fn cmd_train(opts: &TrainOptions) -> Result<TrainSummary> {
    let sel = opts.run.stage;
    let dir = run_dir(&opts.run.out, sel);
    ensure_dir(&dir.join("checkpoints"))?;
    let metrics_path = dir.join("metrics.csv");

    let mut trainer = if opts.resume {
        let ckpt = latest_checkpoint(&dir)?
            .ok_or_else(|| Error::Config(format!("nothing to resume in {}", dir.display())))?;
        if ckpt.stage != sel.stage || ckpt.mode != sel.mode {
            return Err(Error::StageMismatch {
                expected: sel.to_string(),
                found: Selector {
                    stage: ckpt.stage,
                    mode: ckpt.mode,
                }
                .to_string(),
            });
        }
        let mut saved = ckpt.config.clone();
        saved.ppo.total_steps = opts.config.ppo.total_steps;
        if config_digest(&saved) != config_digest(&opts.config) {
            return Err(Error::Config("configuration differs from the checkpoint being resumed".into()));
        }
        info!("resuming {} at update {} ({} env steps)", sel, ckpt.updates, ckpt.env_steps);
        let mut t = Trainer::resume(&ckpt)?;
        t.config.ppo.total_steps = opts.config.ppo.total_steps;
        t
    } else {
        clear_run(&dir)?;
        let net = match sel.stage {
            Stage::Tracking => None,
            Stage::Catching if !sel.mode.uses_tracking() => None,
            Stage::Catching => {
                let path = opts.from.clone().unwrap_or_else(|| {
                    run_dir(
                        &opts.run.out,
                        Selector {
                            stage: Stage::Tracking,
                            mode: sel.mode,
                        },
                    )
                    .join("final.ckpt")
                });
                if !path.exists() {
                    return Err(Error::Config(format!(
                        "{sel} starts from a tracking checkpoint; {} does not exist",
                        path.display()
                    )));
                }
                catching_start(sel.mode, Some(&Checkpoint::load(&path)?))?
            }
        };
        Trainer::new(opts.config.clone(), sel.stage, sel.mode, net)?
    };

    let mut metrics = MetricsWriter::open(&metrics_path)?;
    let every = opts.run.checkpoint_every;
    let mut last = None;
    trainer.train(opts.config.ppo.total_steps, |t, r| {
        metrics.write(r)?;
        info!(
            "{sel} update {} steps {} return {:.3} touch {:.3} catch {:.3} kl {:.4}",
            r.update, r.env_steps, r.mean_return, r.touch_rate, r.catch_rate, r.stats.approx_kl
        );
        if every > 0 && r.update % every == 0 {
            let path = dir.join("checkpoints").join(format!("update_{:06}.ckpt", r.update));
            t.checkpoint().save(&path)?;
        }
        last = Some(r.clone());
        Ok(())
    })?;

    let final_path = dir.join("final.ckpt");
    trainer.checkpoint().save(&final_path)?;
    let digest = sha256_file(&final_path)?;
    let mut manifest = Manifest::new("train", sel, &opts.config);
    manifest.env_steps = trainer.env_steps;
    manifest.updates = trainer.updates;
    manifest.checkpoint_digest = Some(digest.clone());
    manifest.write(&dir.join("manifest.json"))?;
    Ok(TrainSummary {
        dir,
        final_checkpoint: final_path,
        checkpoint_digest: digest,
        env_steps: trainer.env_steps,
        updates: trainer.updates,
        last,
    })
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub checkpoint: PathBuf,
    /// Task to evaluate; must match the checkpoint's stage.
    pub stage: Option<Stage>,
    pub episodes: Option<usize>,
    pub seed: Option<u64>,
    pub seeds: Option<usize>,
    /// Directory for `eval.json` and its manifest.
    pub out: Option<PathBuf>,
}

/// Deterministic evaluation on every object class, repeated over seed
/// groups.
pub fn cmd_eval(opts: &EvalOptions) -> Result<EvalSummary> {
    let ckpt = Checkpoint::load(&opts.checkpoint)?;
    let stage = opts.stage.unwrap_or(ckpt.stage);
    if stage != ckpt.stage {
        return Err(Error::StageMismatch {
            expected: stage.to_string(),
            found: ckpt.stage.to_string(),
        });
    }
    let net = ckpt.net()?;
    let cfg = &ckpt.config;
    let episodes = opts.episodes.unwrap_or(cfg.eval.episodes);
    let base = opts.seed.unwrap_or(cfg.eval.seed);
    let seeds = opts.seeds.unwrap_or(cfg.eval.seeds).max(1);
    let env_cfg = cfg.env_for(stage);
    let weights = *cfg.rewards.for_stage(stage);
    let classes = all_classes();
    let reports = (0..seeds as u64)
        .map(|k| evaluate(&net, &env_cfg, weights, &classes, episodes, base.wrapping_add(k), cfg.eval.batch))
        .collect::<Result<Vec<_>>>()?;
    let digest = sha256_file(&opts.checkpoint)?;
    let summary = summarize(&reports, &ckpt.mode.to_string(), &digest, &config_digest(cfg));
    if let Some(out) = &opts.out {
        ensure_dir(out)?;
        write_json(&out.join("eval.json"), &summary)?;
        let mut manifest = Manifest::new(
            "eval",
            Selector {
                stage,
                mode: ckpt.mode,
            },
            cfg,
        );
        manifest.seed = base;
        manifest.env_steps = ckpt.env_steps;
        manifest.updates = ckpt.updates;
        manifest.checkpoint_digest = Some(digest);
        manifest.write(&out.join("eval_manifest.json"))?;
    }
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    pub checkpoint: PathBuf,
    pub seed: u64,
    pub episodes: usize,
    /// Mean actions instead of samples.
    pub deterministic: bool,
    /// Output file (line-delimited JSON).
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub path: PathBuf,
    pub records: usize,
    /// Summed reward of each episode.
    pub returns: Vec<f64>,
    pub touched: usize,
    pub caught: usize,
}

/// Run episodes with the checkpoint's policy and export every control step.
pub fn cmd_replay(opts: &ReplayOptions) -> Result<ReplaySummary> {
    let ckpt = Checkpoint::load(&opts.checkpoint)?;
    let net = ckpt.net()?;
    let cfg = Arc::new(ckpt.config.env_for(ckpt.stage));
    let mut env = CatchEnv::new(Arc::clone(&cfg), *ckpt.config.rewards.for_stage(ckpt.stage))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut records = Vec::new();
    let mut returns = Vec::with_capacity(opts.episodes);
    let (mut touched, mut caught) = (0, 0);
    for ep in 0..opts.episodes as u64 {
        let mut obs = env.reset(episode_seed(opts.seed, 0, ep))?.to_vec();
        let mut ret = 0.0;
        loop {
            let batch = std::slice::from_ref(&obs);
            let a = if opts.deterministic {
                net.act_deterministic(batch)?
            } else {
                net.act_sampled(batch, &mut rng)?
            };
            let action = Action::from_normalized(&a[0], &cfg.action)?;
            let result = env.step(&action)?;
            ret += result.reward;
            records.push(ReplayRecord::capture(&env, ep, &action, &result));
            if result.done {
                touched += result.outcome.touched as usize;
                caught += result.outcome.caught as usize;
                break;
            }
            obs = result.observation.to_vec();
        }
        returns.push(ret);
    }
    if let Some(parent) = opts.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    let file = File::create(&opts.out).map_err(|e| Error::io(&opts.out, e))?;
    write_jsonl(BufWriter::new(file), &records)?;
    Ok(ReplaySummary {
        path: opts.out.clone(),
        records: records.len(),
        returns,
        touched,
        caught,
    })
}

#[derive(Debug, Clone)]
pub struct PlotOptions {
    pub metrics: PathBuf,
    /// Keep every k-th row plus the last one.
    pub every: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSummary {
    pub rows_in: usize,
    pub rows_out: usize,
    pub skipped: usize,
}

pub const CURVE_COLUMNS: [&str; 4] = ["env_steps", "mean_return", "touch_rate", "catch_rate"];

/// Reduce a metrics CSV to curve columns (steps vs return and success
/// rates). Rows that do not parse are skipped and counted.
pub fn cmd_plotdata(opts: &PlotOptions) -> Result<PlotSummary> {
    if opts.every == 0 {
        return Err(Error::Config("downsampling factor must be at least 1".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(&opts.metrics)
        .map_err(|e| Error::io(&opts.metrics, std::io::Error::other(e.to_string())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: opts.metrics.clone(),
            message: e.to_string(),
        })?
        .clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let cols = CURVE_COLUMNS
        .iter()
        .map(|c| {
            index.get(c).copied().ok_or_else(|| Error::Parse {
                path: opts.metrics.clone(),
                message: format!("missing column `{c}`"),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<[f64; 4]> = Vec::new();
    let mut skipped = 0;
    let mut rows_in = 0;
    for record in reader.records() {
        rows_in += 1;
        let parsed = record.ok().and_then(|r| {
            let mut out = [0.0; 4];
            for (slot, &c) in out.iter_mut().zip(&cols) {
                *slot = r.get(c)?.trim().parse::<f64>().ok().filter(|v| v.is_finite())?;
            }
            Some(out)
        });
        match parsed {
            Some(row) => rows.push(row),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        warn!("skipped {skipped} malformed rows in {}", opts.metrics.display());
    }
    let last = rows.len().saturating_sub(1);
    let kept: Vec<&[f64; 4]> = rows.iter().enumerate().filter(|(i, _)| i % opts.every == 0 || *i == last).map(|(_, r)| r).collect();

    if let Some(parent) = opts.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    let io = |e: csv::Error| Error::io(&opts.out, std::io::Error::other(e.to_string()));
    let mut writer = csv::Writer::from_path(&opts.out).map_err(io)?;
    writer.write_record(CURVE_COLUMNS).map_err(io)?;
    for r in &kept {
        writer
            .write_record([(r[0] as u64).to_string(), r[1].to_string(), r[2].to_string(), r[3].to_string()])
            .map_err(io)?;
    }
    writer.flush().map_err(|e| Error::io(&opts.out, e))?;
    Ok(PlotSummary {
        rows_in,
        rows_out: kept.len(),
        skipped,
    })
}
