use std::fs::OpenOptions;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::checkpoint::{Checkpoint, RngState, FORMAT_VERSION};
use super::config::{CatchMode, PpoConfig};
use super::eval::{evaluate, EvalConfig, EvalReport};
use super::net::{NetSpec, PolicyNet, INITIAL_LOG_STD};
use super::rollout::{episode_seed, mean_terms, rollout, splitmix64, VecEnv, TERM_NAMES};
use super::update::{ppo_update, LossStats};
use crate::error::{Error, Result};
use crate::rewards::{Stage, StageWeights};
use crate::simenv::{EnvConfig, ARM_ACTION_DIM, FULL_OBS_DIM, TRACKING_OBS_DIM};

/// Everything a training run reads.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub ppo: PpoConfig,
    pub env: EnvConfig,
    pub rewards: StageWeights,
    pub eval: EvalConfig,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        self.env.validate()?;
        self.rewards.tracking.validate()?;
        self.rewards.catching.validate()?;
        if self.eval.batch == 0 || self.eval.seeds == 0 {
            return Err(Error::Config("eval.batch and eval.seeds must be positive".into()));
        }
        Ok(())
    }

    pub fn env_for(&self, stage: Stage) -> EnvConfig {
        self.env.clone().with_stage(stage)
    }
}

/// One line of training metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub stage: Stage,
    pub update: u64,
    pub env_steps: u64,
    pub episodes: usize,
    pub mean_return: f64,
    pub touch_rate: f64,
    pub catch_rate: f64,
    /// Mean per-step raw reward terms.
    pub terms: [f64; 7],
    pub stats: LossStats,
    /// Statistics of the first minibatch, computed before any update.
    pub first: LossStats,
    pub faults: usize,
    pub eval: Option<EvalReport>,
}

fn stage_salt(stage: Stage) -> u64 {
    match stage {
        Stage::Tracking => 0x7A_C4,
        Stage::Catching => 0xCA_7C,
    }
}

pub fn net_spec(cfg: &PpoConfig, stage: Stage, mode: CatchMode) -> NetSpec {
    NetSpec {
        obs_dim: FULL_OBS_DIM,
        hidden: cfg.hidden.clone(),
        hand: stage == Stage::Catching,
        roll: mode.roll_enabled(),
    }
}

/// PPO learner bound to one stage.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub stage: Stage,
    pub mode: CatchMode,
    pub net: PolicyNet,
    pub adam: Adam,
    rng: ChaCha8Rng,
    venv: VecEnv,
    pub env_steps: u64,
    pub updates: u64,
}

impl Trainer {
    /// `net` continues from a given network (transfer); otherwise a fresh
    /// one is drawn from the run seed.
    pub fn new(config: TrainConfig, stage: Stage, mode: CatchMode, net: Option<PolicyNet>) -> Result<Self> {
        config.validate()?;
        let seed = splitmix64(config.ppo.seed ^ stage_salt(stage));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = net_spec(&config.ppo, stage, mode);
        let net = match net {
            Some(n) if n.spec == spec => n,
            Some(n) => {
                return Err(Error::Config(format!(
                    "network shape {:?} does not fit stage {stage} / mode {mode}",
                    n.spec
                )))
            }
            None => PolicyNet::new(spec, &mut rng)?,
        };
        let adam = Adam::new(net.params.len(), config.ppo.learning_rate);
        let env_cfg = Arc::new(config.env_for(stage));
        let weights = *config.rewards.for_stage(stage);
        let venv = VecEnv::new(env_cfg, weights, config.ppo.num_envs, episode_seed(seed, u64::MAX, 0))?;
        Ok(Trainer {
            config,
            stage,
            mode,
            net,
            adam,
            rng,
            venv,
            env_steps: 0,
            updates: 0,
        })
    }

    /// Continue a run from its checkpoint.
    pub fn resume(ckpt: &Checkpoint) -> Result<Self> {
        let mut t = Trainer::new(ckpt.config.clone(), ckpt.stage, ckpt.mode, Some(ckpt.net()?))?;
        t.adam = ckpt.adam.clone();
        t.rng = ckpt.rng.restore();
        t.env_steps = ckpt.env_steps;
        t.updates = ckpt.updates;
        Ok(t)
    }

    fn rollout_seed(&self) -> u64 {
        episode_seed(splitmix64(self.config.ppo.seed ^ stage_salt(self.stage)), u64::MAX, self.updates)
    }

    /// Collect one batch, update, then fold the batch into the normalizer.
    pub fn step(&mut self) -> Result<UpdateReport> {
        let ppo = self.config.ppo.clone();
        self.venv.reseed(self.rollout_seed())?;
        let batch = rollout(&mut self.venv, &self.net, ppo.horizon, ppo.gamma, ppo.lambda, &mut self.rng)?;
        let (stats, first) = ppo_update(&mut self.net, &mut self.adam, &batch.data, &ppo, &mut self.rng)?;
        if self.net.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged(format!("non-finite parameters after update {}", self.updates)));
        }
        self.net.normalizer.update(batch.raw_obs.iter().map(|r| r.as_slice()));
        self.env_steps += batch.env_steps;
        self.updates += 1;

        let eps = &batch.episodes;
        let n = eps.len().max(1) as f64;
        let eval = if self.config.eval.interval > 0 && self.updates.is_multiple_of(self.config.eval.interval) {
            Some(self.evaluate(self.config.eval.interval_episodes, &[None])?)
        } else {
            None
        };
        Ok(UpdateReport {
            stage: self.stage,
            update: self.updates,
            env_steps: self.env_steps,
            episodes: eps.len(),
            mean_return: eps.iter().map(|e| e.ret).sum::<f64>() / n,
            touch_rate: eps.iter().filter(|e| e.touched).count() as f64 / n,
            catch_rate: eps.iter().filter(|e| e.caught).count() as f64 / n,
            terms: mean_terms(eps),
            stats,
            first,
            faults: batch.faults,
            eval,
        })
    }

    /// Train until `budget` env steps have been taken in this stage.
    pub fn train<F>(&mut self, budget: u64, mut on_update: F) -> Result<()>
    where
        F: FnMut(&Trainer, &UpdateReport) -> Result<()>,
    {
        while self.env_steps < budget {
            let report = self.step()?;
            on_update(self, &report)?;
        }
        Ok(())
    }

    pub fn evaluate(&self, episodes: usize, classes: &[Option<crate::simenv::ObjectClass>]) -> Result<EvalReport> {
        evaluate(
            &self.net,
            &self.config.env_for(self.stage),
            *self.config.rewards.for_stage(self.stage),
            classes,
            episodes,
            self.config.eval.seed,
            self.config.eval.batch,
        )
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: FORMAT_VERSION,
            stage: self.stage,
            mode: self.mode,
            spec: self.net.spec.clone(),
            layout: self.net.layout.clone(),
            params: self.net.params.clone(),
            normalizer: self.net.normalizer.clone(),
            adam: self.adam.clone(),
            config: self.config.clone(),
            rng: RngState::capture(&self.rng),
            env_steps: self.env_steps,
            updates: self.updates,
        }
    }
}

/// Build the catching network from a tracking checkpoint: trunk, arm head,
/// critic and normalizer are copied; the hand head starts with zero weights
/// and the hand observation statistics start empty.
pub fn transfer_to_catching(ckpt: &Checkpoint) -> Result<PolicyNet> {
    if ckpt.stage != Stage::Tracking {
        return Err(Error::StageMismatch {
            expected: Stage::Tracking.to_string(),
            found: ckpt.stage.to_string(),
        });
    }
    let src = ckpt.net()?;
    let spec = NetSpec {
        hand: true,
        ..src.spec.clone()
    };
    let layout = super::net::Layout::for_spec(&spec);
    let mut params = vec![0.0; layout.len()];
    for seg in &layout.segments {
        match src.layout.get(&seg.name) {
            Some(from) if seg.name == "log_std" => {
                let dst = &mut params[seg.range()];
                dst.fill(INITIAL_LOG_STD);
                dst[..ARM_ACTION_DIM].copy_from_slice(&src.params[from.range()]);
            }
            Some(from) => params[seg.range()].copy_from_slice(&src.params[from.range()]),
            None => {}
        }
    }
    let mut normalizer = src.normalizer.clone();
    normalizer.reset_slots(TRACKING_OBS_DIM..FULL_OBS_DIM);
    Ok(PolicyNet {
        spec,
        layout,
        params,
        normalizer,
    })
}

/// Tracking pre-training for `config.ppo.total_steps` env steps.
pub fn train_tracking<F>(config: &TrainConfig, mode: CatchMode, on_update: F) -> Result<Trainer>
where
    F: FnMut(&Trainer, &UpdateReport) -> Result<()>,
{
    let mut t = Trainer::new(config.clone(), Stage::Tracking, mode, None)?;
    t.train(config.ppo.total_steps, on_update)?;
    Ok(t)
}

/// Starting network for catching in `mode`: transferred from the tracking
/// checkpoint for two-stage and no-roll, fresh (`None`) for one-stage.
pub fn catching_start(mode: CatchMode, tracking: Option<&Checkpoint>) -> Result<Option<PolicyNet>> {
    match (mode.uses_tracking(), tracking) {
        (true, Some(ckpt)) => {
            if ckpt.mode != mode {
                return Err(Error::Config(format!("tracking checkpoint was trained for mode {}, not {mode}", ckpt.mode)));
            }
            Ok(Some(transfer_to_catching(ckpt)?))
        }
        (true, None) => Err(Error::Config(format!("mode {mode} needs a tracking checkpoint"))),
        (false, _) => Ok(None),
    }
}

/// Catching training. Two-stage and no-roll modes need the tracking
/// checkpoint; one-stage starts from scratch and ignores it.
pub fn train_catching<F>(config: &TrainConfig, mode: CatchMode, tracking: Option<&Checkpoint>, on_update: F) -> Result<Trainer>
where
    F: FnMut(&Trainer, &UpdateReport) -> Result<()>,
{
    let net = catching_start(mode, tracking)?;
    let mut t = Trainer::new(config.clone(), Stage::Catching, mode, net)?;
    t.train(config.ppo.total_steps, on_update)?;
    Ok(t)
}

/// Append-only CSV of [`UpdateReport`]s.
pub struct MetricsWriter {
    writer: csv::Writer<std::fs::File>,
}

pub const METRICS_HEADER: [&str; 21] = [
    "stage", "update", "env_steps", "episodes", "mean_return", "touch_rate", "catch_rate", "r_pos", "r_pre", "r_orient",
    "r_touch", "r_stab", "r_ctrl", "r_cstr", "policy_loss", "value_loss", "entropy", "clip_fraction", "approx_kl",
    "grad_norm", "faults",
];

impl MetricsWriter {
    pub fn open(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
        let empty = file.metadata().map_err(|e| Error::io(path, e))?.len() == 0;
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        if empty {
            writer.write_record(METRICS_HEADER).map_err(|e| csv_error(path, e))?;
        }
        Ok(MetricsWriter { writer })
    }

    pub fn write(&mut self, r: &UpdateReport) -> Result<()> {
        let mut row = vec![
            r.stage.to_string(),
            r.update.to_string(),
            r.env_steps.to_string(),
            r.episodes.to_string(),
            r.mean_return.to_string(),
            r.touch_rate.to_string(),
            r.catch_rate.to_string(),
        ];
        row.extend(r.terms.iter().map(|t| t.to_string()));
        let s = &r.stats;
        row.extend(
            [s.policy_loss, s.value_loss, s.entropy, s.clip_fraction, s.approx_kl, s.grad_norm]
                .iter()
                .map(|v| v.to_string()),
        );
        row.push(r.faults.to_string());
        debug_assert_eq!(row.len(), METRICS_HEADER.len());
        debug_assert_eq!(TERM_NAMES.len(), 7);
        self.writer.write_record(&row).map_err(|e| csv_error(Path::new("<metrics>"), e))?;
        self.writer.flush().map_err(|e| Error::io("<metrics>", e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}
