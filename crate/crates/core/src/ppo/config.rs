use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the catching policy is obtained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CatchMode {
    /// Tracking pre-training, then catching from the transferred policy.
    #[default]
    TwoStage,
    /// Catching trained from scratch.
    OneStage,
    /// Two-stage with the roll action frozen at zero in both stages.
    NoRoll,
}

impl CatchMode {
    pub const ALL: [CatchMode; 3] = [CatchMode::TwoStage, CatchMode::OneStage, CatchMode::NoRoll];

    pub fn roll_enabled(self) -> bool {
        self != CatchMode::NoRoll
    }

    pub fn uses_tracking(self) -> bool {
        self != CatchMode::OneStage
    }
}

impl fmt::Display for CatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CatchMode::TwoStage => "two-stage",
            CatchMode::OneStage => "one-stage",
            CatchMode::NoRoll => "no-roll",
        })
    }
}

impl FromStr for CatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-stage" | "two_stage" => Ok(CatchMode::TwoStage),
            "one-stage" | "one_stage" => Ok(CatchMode::OneStage),
            "no-roll" | "no_roll" => Ok(CatchMode::NoRoll),
            other => Err(Error::Unknown {
                kind: "mode",
                value: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub num_envs: usize,
    /// Control steps per env per rollout.
    pub horizon: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    /// Env steps per stage.
    pub total_steps: u64,
    pub seed: u64,
    pub hidden: Vec<usize>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            num_envs: 64,
            horizon: 128,
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatches: 4,
            learning_rate: 3e-4,
            entropy_coef: 0.0,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            total_steps: 5_000_000,
            seed: 0,
            hidden: vec![256, 256],
        }
    }
}

impl PpoConfig {
    pub fn steps_per_update(&self) -> u64 {
        (self.num_envs * self.horizon) as u64
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let ok = self.num_envs >= 1
            && self.horizon >= 1
            && unit(self.gamma)
            && unit(self.lambda)
            && self.clip > 0.0
            && self.epochs >= 1
            && self.minibatches >= 1
            && self.minibatches <= self.num_envs * self.horizon
            && self.learning_rate > 0.0
            && self.entropy_coef >= 0.0
            && self.value_coef >= 0.0
            && self.max_grad_norm > 0.0
            && !self.hidden.is_empty()
            && !self.hidden.contains(&0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid PPO configuration: {self:?}")))
        }
    }
}
