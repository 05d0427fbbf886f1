use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::net::PolicyNet;
use super::rollout::episode_seed;
use crate::error::Result;
use crate::rewards::{RewardWeights, Stage};
use crate::simenv::{CatchEnv, EnvConfig, ObjectClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Episodes per object class and seed group.
    pub episodes: usize,
    pub seed: u64,
    /// Seed groups; the report gives mean and spread over them.
    pub seeds: usize,
    /// Evaluate every this many updates during training (0 disables).
    pub interval: u64,
    /// Episodes per periodic evaluation.
    pub interval_episodes: usize,
    /// Envs stepped together.
    pub batch: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            episodes: 256,
            seed: 0x5EED_0E7A,
            seeds: 3,
            interval: 0,
            interval_episodes: 64,
            batch: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub name: String,
    pub episodes: usize,
    pub touch_rate: f64,
    pub catch_rate: f64,
    pub mean_return: f64,
    pub mean_steps_held: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub stage: Stage,
    pub seed: u64,
    pub episodes: usize,
    pub touch_rate: f64,
    pub catch_rate: f64,
    pub classes: Vec<ClassReport>,
}

impl EvalReport {
    pub fn class(&self, name: &str) -> Option<&ClassReport> {
        self.classes.iter().find(|c| c.name == name)
    }
}

/// Run the deterministic (mean-action) policy for `episodes` episodes per
/// class. `None` stands for the training object distribution.
pub fn evaluate(
    net: &PolicyNet,
    env_cfg: &EnvConfig,
    weights: RewardWeights,
    classes: &[Option<ObjectClass>],
    episodes: usize,
    seed: u64,
    batch: usize,
) -> Result<EvalReport> {
    let cfg = Arc::new(env_cfg.clone());
    let batch = batch.max(1);
    let mut reports = Vec::with_capacity(classes.len());
    for (c, class) in classes.iter().enumerate() {
        let mut envs: Vec<CatchEnv> = (0..batch.min(episodes))
            .map(|_| {
                let mut e = CatchEnv::new(Arc::clone(&cfg), weights)?;
                e.set_object_class(class.clone());
                Ok(e)
            })
            .collect::<Result<_>>()?;
        let (mut touched, mut caught, mut ret, mut held) = (0usize, 0usize, 0.0, 0.0);
        let mut start = 0;
        while start < episodes {
            let count = batch.min(episodes - start);
            let mut obs = Vec::with_capacity(count);
            for (k, env) in envs.iter_mut().take(count).enumerate() {
                obs.push(env.reset(episode_seed(seed, c as u64, (start + k) as u64))?.to_vec());
            }
            let mut returns = vec![0.0; count];
            let mut active: Vec<usize> = (0..count).collect();
            while !active.is_empty() {
                let inputs: Vec<Vec<f64>> = active.iter().map(|&k| obs[k].clone()).collect();
                let actions = net.act_deterministic(&inputs)?;
                let mut slots: Vec<(usize, &mut CatchEnv)> = envs.iter_mut().take(count).enumerate().filter(|(k, _)| active.contains(k)).collect();
                let results: Vec<_> = slots
                    .par_iter_mut()
                    .zip(actions.par_iter())
                    .map(|((_, env), a)| env.step_normalized(a))
                    .collect();
                let mut still = Vec::with_capacity(active.len());
                for (&k, r) in active.iter().zip(results) {
                    let r = r?;
                    returns[k] += r.reward;
                    if r.done {
                        touched += r.outcome.touched as usize;
                        caught += r.outcome.caught as usize;
                        held += r.outcome.steps_held as f64;
                    } else {
                        obs[k] = r.observation.to_vec();
                        still.push(k);
                    }
                }
                active = still;
            }
            ret += returns.iter().sum::<f64>();
            start += count;
        }
        let n = episodes.max(1) as f64;
        reports.push(ClassReport {
            name: class.as_ref().map_or_else(|| "training".to_string(), ObjectClass::name),
            episodes,
            touch_rate: touched as f64 / n,
            catch_rate: caught as f64 / n,
            mean_return: ret / n,
            mean_steps_held: held / n,
        });
    }
    let total: usize = reports.iter().map(|r| r.episodes).sum();
    let weighted = |f: fn(&ClassReport) -> f64| {
        if total == 0 {
            0.0
        } else {
            reports.iter().map(|r| f(r) * r.episodes as f64).sum::<f64>() / total as f64
        }
    };
    Ok(EvalReport {
        stage: env_cfg.stage,
        seed,
        episodes: total,
        touch_rate: weighted(|r| r.touch_rate),
        catch_rate: weighted(|r| r.catch_rate),
        classes: reports,
    })
}

/// The training shapes followed by the held-out objects.
pub fn all_classes() -> Vec<Option<ObjectClass>> {
    ObjectClass::training().into_iter().chain(ObjectClass::held_out()).map(Some).collect()
}
