use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::env::{CatchEnv, EnvParams, StepResult};
use super::types::{Action, EpisodeOutcome, HAND_DOF};
use crate::error::{Error, Result};
use crate::kinematics::{BasePose, JointVector};
use crate::rewards::{total_reward, RewardBreakdown, RewardContext, RewardWeights, Stage};

/// One control step of a recorded episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub episode: u64,
    pub step: u32,
    pub time: f64,
    pub stage: Stage,
    pub base: BasePose,
    pub arm_q: JointVector,
    pub hand_q: [f64; HAND_DOF],
    pub palm: [f64; 3],
    pub object: [f64; 3],
    pub object_velocity: [f64; 3],
    pub held: bool,
    pub action: Action,
    pub reward: f64,
    pub terms: RewardBreakdown,
    pub context: RewardContext,
    pub outcome: EpisodeOutcome,
    pub done: bool,
    /// Present on the first record of each episode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<EnvParams>,
}

impl ReplayRecord {
    pub fn capture(env: &CatchEnv, episode: u64, action: &Action, result: &StepResult) -> Self {
        let w = env.world();
        ReplayRecord {
            episode,
            step: w.step,
            time: w.time(env.config()),
            stage: env.stage(),
            base: w.base,
            arm_q: w.arm_q,
            hand_q: w.hand.joints,
            palm: w.palm.position.into(),
            object: w.object.position.into(),
            object_velocity: w.object.velocity.into(),
            held: w.object.held,
            action: *action,
            reward: result.reward,
            terms: result.breakdown,
            context: result.context.clone(),
            outcome: result.outcome,
            done: result.done,
            params: (w.step == 1).then_some(w.params),
        }
    }

    /// Reward recomputed from the stored context.
    pub fn recompute(&self, weights: &RewardWeights) -> (f64, RewardBreakdown) {
        total_reward(&self.context, weights, self.stage)
    }
}

/// Write records as JSON lines.
pub fn write_jsonl<W: Write>(mut out: W, records: &[ReplayRecord]) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Checkpoint(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io("<replay>", e))?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<ReplayRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<replay>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: format!("<replay line {}>", i + 1).into(),
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}
