use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gae::compute_gae;
use super::net::{env_action, PolicyNet};
use super::update::UpdateData;
use crate::error::Result;
use crate::rewards::{RewardBreakdown, RewardWeights};
use crate::simenv::{CatchEnv, EnvConfig, StepResult};

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Reset seed of episode `episode` of env `env` under `base`.
pub fn episode_seed(base: u64, env: u64, episode: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ env) ^ episode)
}

/// Summary of one finished episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub ret: f64,
    pub length: u32,
    pub touched: bool,
    pub caught: bool,
    /// Per-term sums over the episode.
    pub terms: [f64; 7],
}

/// A bank of environments stepped in lockstep.
#[derive(Debug, Clone)]
pub struct VecEnv {
    pub envs: Vec<CatchEnv>,
    obs: Vec<Vec<f64>>,
    episode: Vec<u64>,
    running: Vec<EpisodeSummary>,
    base_seed: u64,
}

impl VecEnv {
    pub fn new(cfg: Arc<EnvConfig>, weights: RewardWeights, n: usize, base_seed: u64) -> Result<Self> {
        let envs = (0..n)
            .map(|_| CatchEnv::new(Arc::clone(&cfg), weights))
            .collect::<Result<Vec<_>>>()?;
        let mut v = VecEnv {
            obs: vec![Vec::new(); n],
            episode: vec![0; n],
            running: vec![empty_summary(); n],
            envs,
            base_seed,
        };
        v.reseed(base_seed)?;
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    /// Restart every env with a new seed family.
    pub fn reseed(&mut self, base_seed: u64) -> Result<()> {
        self.base_seed = base_seed;
        for i in 0..self.envs.len() {
            self.episode[i] = 0;
            self.reset_env(i)?;
        }
        Ok(())
    }

    fn reset_env(&mut self, i: usize) -> Result<()> {
        let seed = episode_seed(self.base_seed, i as u64, self.episode[i]);
        self.episode[i] += 1;
        self.obs[i] = self.envs[i].reset(seed)?.to_vec();
        self.running[i] = empty_summary();
        Ok(())
    }

    pub fn observations(&self) -> &[Vec<f64>] {
        &self.obs
    }
}

fn empty_summary() -> EpisodeSummary {
    EpisodeSummary {
        ret: 0.0,
        length: 0,
        touched: false,
        caught: false,
        terms: [0.0; 7],
    }
}

#[derive(Debug, Clone)]
struct Record {
    obs: Vec<f64>,
    action: Vec<f64>,
    logp: f64,
    value: f64,
    reward: f64,
    done: bool,
}

/// Everything collected in one rollout, flattened env-major.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    pub data: UpdateData,
    pub values: Array1<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub env_index: Vec<usize>,
    /// Raw observations for the normalizer update.
    pub raw_obs: Vec<Vec<f64>>,
    pub episodes: Vec<EpisodeSummary>,
    pub faults: usize,
    /// Env steps taken, including dropped ones.
    pub env_steps: u64,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Step all envs `horizon` times with actions sampled from `net`. Envs run
/// in parallel; sampling and bookkeeping happen in env order on the caller's
/// thread, so the result depends only on the inputs and `rng`.
pub fn rollout<R: Rng + ?Sized>(venv: &mut VecEnv, net: &PolicyNet, horizon: usize, gamma: f64, lambda: f64, rng: &mut R) -> Result<RolloutBatch> {
    let n = venv.len();
    let a_dim = net.action_dim();
    let mask = net.spec.action_mask();
    let std = net.std();
    let mut records: Vec<Vec<Record>> = vec![Vec::with_capacity(horizon); n];
    let mut raw_obs = Vec::with_capacity(n * horizon);
    let mut episodes = Vec::new();
    let mut faults = 0;

    for _ in 0..horizon {
        let x = net.normalize_batch(&venv.obs)?;
        let fp = net.forward(x.clone())?;
        let mut actions = Array2::zeros((n, a_dim));
        for i in 0..n {
            for j in 0..a_dim {
                if mask[j] != 0.0 {
                    let eps: f64 = StandardNormal.sample(rng);
                    actions[(i, j)] = fp.mean[(i, j)] + std[j] * eps;
                }
            }
        }
        let logp = net.log_prob(fp.mean.view(), actions.view());
        let commands: Vec<Vec<f64>> = actions
            .rows()
            .into_iter()
            .map(|row| env_action(row.as_slice().expect("row-major"), &mask))
            .collect();
        let results: Vec<Result<StepResult>> = venv
            .envs
            .par_iter_mut()
            .zip(commands.par_iter())
            .map(|(env, a)| env.step_normalized(a))
            .collect();

        for (i, result) in results.into_iter().enumerate() {
            let r = result?;
            if r.outcome.fault {
                faults += 1;
                if let Some(last) = records[i].last_mut() {
                    last.done = true;
                }
                venv.reset_env(i)?;
                continue;
            }
            raw_obs.push(venv.obs[i].clone());
            records[i].push(Record {
                obs: x.row(i).to_vec(),
                action: actions.row(i).to_vec(),
                logp: logp[i],
                value: fp.value[i],
                reward: r.reward,
                done: r.done,
            });
            let ep = &mut venv.running[i];
            ep.ret += r.reward;
            ep.length += 1;
            ep.touched = r.outcome.touched;
            ep.caught = r.outcome.caught;
            for (t, v) in ep.terms.iter_mut().zip(r.breakdown.as_array()) {
                *t += v;
            }
            if r.done {
                episodes.push(*ep);
                venv.reset_env(i)?;
            } else {
                venv.obs[i] = r.observation.to_vec();
            }
        }
    }

    let bootstrap = net.forward(net.normalize_batch(&venv.obs)?)?.value;
    let total: usize = records.iter().map(Vec::len).sum();
    let mut obs = Array2::zeros((total, net.spec.obs_dim));
    let mut actions = Array2::zeros((total, a_dim));
    let mut logp = Array1::zeros(total);
    let mut values = Array1::zeros(total);
    let mut advantages = Array1::zeros(total);
    let mut returns = Array1::zeros(total);
    let mut rewards = Vec::with_capacity(total);
    let mut dones = Vec::with_capacity(total);
    let mut env_index = Vec::with_capacity(total);
    let mut k = 0;
    for (i, recs) in records.iter().enumerate() {
        let r: Vec<f64> = recs.iter().map(|x| x.reward).collect();
        let v: Vec<f64> = recs.iter().map(|x| x.value).collect();
        let d: Vec<bool> = recs.iter().map(|x| x.done).collect();
        let (adv, ret) = compute_gae(&r, &v, &d, bootstrap[i], gamma, lambda);
        for (t, rec) in recs.iter().enumerate() {
            obs.row_mut(k).assign(&Array1::from(rec.obs.clone()));
            actions.row_mut(k).assign(&Array1::from(rec.action.clone()));
            logp[k] = rec.logp;
            values[k] = rec.value;
            advantages[k] = adv[t];
            returns[k] = ret[t];
            rewards.push(rec.reward);
            dones.push(rec.done);
            env_index.push(i);
            k += 1;
        }
    }
    Ok(RolloutBatch {
        data: UpdateData {
            obs,
            actions,
            logp,
            advantages,
            returns,
        },
        values,
        rewards,
        dones,
        env_index,
        raw_obs,
        episodes,
        faults,
        env_steps: (n * horizon) as u64,
    })
}

/// Mean per-step value of every reward term over finished episodes.
pub fn mean_terms(episodes: &[EpisodeSummary]) -> [f64; 7] {
    let steps: f64 = episodes.iter().map(|e| e.length as f64).sum();
    let mut out = [0.0; 7];
    if steps == 0.0 {
        return out;
    }
    for e in episodes {
        for (o, t) in out.iter_mut().zip(e.terms) {
            *o += t / steps;
        }
    }
    out
}

pub const TERM_NAMES: [&str; 7] = RewardBreakdown::TERMS;
