//! Shaped reward terms and their stage-dependent weighted sum.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Training stage. Tracking controls base and arm only; catching adds the hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Tracking,
    Catching,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Tracking => "tracking",
            Stage::Catching => "catching",
        })
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "track" | "tracking" => Ok(Stage::Tracking),
            "catch" | "catching" => Ok(Stage::Catching),
            other => Err(Error::Unknown {
                kind: "stage",
                value: other.to_string(),
            }),
        }
    }
}

/// Everything the reward terms read at one control step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardContext {
    /// Object position (world, m).
    pub object_position: Vector3<f64>,
    /// Object position change over the last control step (m).
    pub object_delta: Vector3<f64>,
    /// Palm center (world, m).
    pub palm_position: Vector3<f64>,
    /// Unit palm z-axis (world).
    pub palm_z: Vector3<f64>,
    /// Running closest palm-to-object distance before this step (m).
    pub closest_distance: f64,
    /// Normalized policy output for the active action dimensions.
    pub action: Vec<f64>,
    pub touched: bool,
    /// Seconds held during this control step.
    pub held_duration: f64,
    pub limit_violated: bool,
}

impl RewardContext {
    pub fn distance(&self) -> f64 {
        (self.palm_position - self.object_position).norm()
    }

    /// Running minimum including the current step.
    pub fn updated_closest(&self) -> f64 {
        self.closest_distance.min(self.distance())
    }
}

pub fn r_pos(ctx: &RewardContext) -> f64 {
    ctx.closest_distance - ctx.distance()
}

pub fn r_pre(ctx: &RewardContext) -> f64 {
    let d = ctx.updated_closest();
    (-50.0 * d * d).exp()
}

pub fn r_orient(ctx: &RewardContext) -> f64 {
    ctx.object_delta.dot(&ctx.palm_z).clamp(-1.0, 1.0)
}

pub fn r_touch(ctx: &RewardContext) -> f64 {
    if ctx.touched {
        1.0
    } else {
        0.0
    }
}

pub fn r_stab(ctx: &RewardContext) -> f64 {
    ctx.held_duration.max(0.0)
}

pub fn r_ctrl(ctx: &RewardContext) -> f64 {
    ctx.action.iter().map(|a| a * a).sum()
}

pub fn r_cstr(ctx: &RewardContext) -> f64 {
    if ctx.limit_violated {
        -1.0
    } else {
        0.0
    }
}

/// Scaling coefficients. All weights are stored non-negative; the control
/// term enters the sum with a minus sign and the constraint term is already
/// negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub pos: f64,
    pub pre: f64,
    pub orient: f64,
    pub touch: f64,
    pub stab: f64,
    pub ctrl: f64,
    pub cstr: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            pos: 10.0,
            pre: 1.0,
            orient: 0.5,
            touch: 5.0,
            stab: 20.0,
            ctrl: 0.01,
            cstr: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn zero() -> Self {
        RewardWeights {
            pos: 0.0,
            pre: 0.0,
            orient: 0.0,
            touch: 0.0,
            stab: 0.0,
            ctrl: 0.0,
            cstr: 0.0,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let all = [self.pos, self.pre, self.orient, self.touch, self.stab, self.ctrl, self.cstr];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("reward weights must be finite and >= 0: {self:?}")))
        }
    }

    /// Effective coefficient vector in [`RewardBreakdown::TERMS`] order with
    /// stage gating and the control sign folded in.
    pub fn coefficients(&self, stage: Stage) -> [f64; 7] {
        let (touch, stab) = match stage {
            Stage::Tracking => (self.touch, 0.0),
            Stage::Catching => (0.0, self.stab),
        };
        [self.pos, self.pre, self.orient, touch, stab, -self.ctrl, self.cstr]
    }
}

/// Per-stage weights as stored in the reward config file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageWeights {
    pub tracking: RewardWeights,
    pub catching: RewardWeights,
}

impl StageWeights {
    pub fn for_stage(&self, stage: Stage) -> &RewardWeights {
        match stage {
            Stage::Tracking => &self.tracking,
            Stage::Catching => &self.catching,
        }
    }
}

/// Raw (unweighted) values of every term.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub pos: f64,
    pub pre: f64,
    pub orient: f64,
    pub touch: f64,
    pub stab: f64,
    pub ctrl: f64,
    pub cstr: f64,
}

impl RewardBreakdown {
    pub const TERMS: [&'static str; 7] = ["pos", "pre", "orient", "touch", "stab", "ctrl", "cstr"];

    pub fn evaluate(ctx: &RewardContext) -> Self {
        RewardBreakdown {
            pos: r_pos(ctx),
            pre: r_pre(ctx),
            orient: r_orient(ctx),
            touch: r_touch(ctx),
            stab: r_stab(ctx),
            ctrl: r_ctrl(ctx),
            cstr: r_cstr(ctx),
        }
    }

    pub fn as_array(&self) -> [f64; 7] {
        [self.pos, self.pre, self.orient, self.touch, self.stab, self.ctrl, self.cstr]
    }

    /// Weighted sum under `stage`'s gating.
    pub fn weighted(&self, weights: &RewardWeights, stage: Stage) -> f64 {
        self.as_array()
            .iter()
            .zip(weights.coefficients(stage))
            .fold(0.0, |acc, (r, w)| acc + w * r)
    }
}

/// Stage-gated weighted reward plus the per-term breakdown.
pub fn total_reward(ctx: &RewardContext, weights: &RewardWeights, stage: Stage) -> (f64, RewardBreakdown) {
    let breakdown = RewardBreakdown::evaluate(ctx);
    (breakdown.weighted(weights, stage), breakdown)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ctx() -> RewardContext {
        RewardContext {
            object_position: Vector3::zeros(),
            object_delta: Vector3::zeros(),
            palm_position: Vector3::zeros(),
            palm_z: Vector3::z(),
            closest_distance: 0.0,
            action: vec![0.0; 6],
            touched: false,
            held_duration: 0.0,
            limit_violated: false,
        }
    }

    fn at_distance(prev: f64, now: f64) -> RewardContext {
        RewardContext {
            palm_position: Vector3::new(now, 0.0, 0.0),
            closest_distance: prev,
            ..ctx()
        }
    }

    #[test]
    fn position_term() {
        assert_relative_eq!(r_pos(&at_distance(0.5, 0.3)), 0.2, epsilon = 1e-15);
        assert_eq!(r_pos(&at_distance(0.3, 0.3)), 0.0);
        assert_relative_eq!(r_pos(&at_distance(0.3, 0.5)), -0.2, epsilon = 1e-15);
    }

    #[test]
    fn precision_term() {
        assert_eq!(r_pre(&at_distance(0.0, 0.0)), 1.0);
        // |d|^2 = 0.02  ->  exp(-1)
        assert_relative_eq!(r_pre(&at_distance(0.02f64.sqrt(), 5.0)), (-1.0f64).exp(), epsilon = 1e-15);
        let far = r_pre(&at_distance(1.0, 2.0));
        assert!(far > 0.0);
        assert_relative_eq!(far, 1.9287498479639178e-22, max_relative = 1e-12);
        // uses the running minimum
        assert_relative_eq!(r_pre(&at_distance(1.0, 0.1)), (-0.5f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn orientation_term() {
        let mut c = ctx();
        c.object_delta = Vector3::new(0.0, 0.0, -2.0);
        c.palm_z = Vector3::new(0.0, 0.0, -1.0);
        assert_eq!(r_orient(&c), 1.0);
        c.object_delta = Vector3::new(1.0, 0.0, 0.0);
        assert_eq!(r_orient(&c), 0.0);
        c.object_delta = Vector3::new(0.0, 0.0, 0.5);
        assert_eq!(r_orient(&c), -0.5);
    }

    #[test]
    fn binary_terms() {
        let mut c = ctx();
        assert_eq!(r_touch(&c), 0.0);
        assert_eq!(r_cstr(&c), 0.0);
        c.touched = true;
        c.limit_violated = true;
        assert_eq!(r_touch(&c), 1.0);
        assert_eq!(r_cstr(&c), -1.0);
    }

    #[test]
    fn stability_is_additive() {
        let mut c = ctx();
        c.held_duration = 1.0 / 25.0;
        assert_eq!(r_stab(&c), 0.04);
        let total: f64 = (0..10).map(|_| r_stab(&c)).sum();
        assert_relative_eq!(total, 0.4, epsilon = 1e-15);
        c.held_duration = 0.0;
        assert_eq!(r_stab(&c), 0.0);
    }

    #[test]
    fn control_term() {
        let mut c = ctx();
        assert_eq!(r_ctrl(&c), 0.0);
        c.action = vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(r_ctrl(&c), 1.0);
        c.action = vec![0.3, 0.4, 0.0, 0.0, 0.0, 0.0];
        assert_relative_eq!(r_ctrl(&c), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn zero_context_only_precision_survives() {
        let c = RewardContext {
            closest_distance: 0.4,
            palm_position: Vector3::new(0.4, 0.0, 0.0),
            ..ctx()
        };
        let w = RewardWeights::default();
        for stage in [Stage::Tracking, Stage::Catching] {
            let (total, _) = total_reward(&c, &w, stage);
            assert_relative_eq!(total, w.pre * (-50.0f64 * 0.16).exp(), epsilon = 1e-15);
        }
        let (total, _) = total_reward(&at_distance(0.2, 0.1), &RewardWeights::zero(), Stage::Catching);
        assert_eq!(total, 0.0);
    }

    #[test]
    fn stage_gating_and_manual_sum() {
        let c = RewardContext {
            object_position: Vector3::new(0.1, 0.0, 0.0),
            object_delta: Vector3::new(0.0, 0.0, 0.3),
            palm_position: Vector3::zeros(),
            palm_z: Vector3::z(),
            closest_distance: 0.25,
            action: vec![0.5, -0.5, 0.0, 0.1, 0.0, 0.0],
            touched: true,
            held_duration: 0.04,
            limit_violated: true,
        };
        let w = RewardWeights::default();
        // Independently: pos 0.15, pre exp(-0.5), orient 0.3, touch 1, stab 0.04,
        // ctrl 0.51, cstr -1.
        let pos = 0.25 - 0.1;
        let pre = (-50.0f64 * 0.01).exp();
        let track = 10.0 * pos + pre + 0.5 * 0.3 + 5.0 * 1.0 - 0.01 * 0.51 - 1.0;
        let catch = 10.0 * pos + pre + 0.5 * 0.3 + 20.0 * 0.04 - 0.01 * 0.51 - 1.0;
        assert_relative_eq!(total_reward(&c, &w, Stage::Tracking).0, track, epsilon = 1e-12);
        assert_relative_eq!(total_reward(&c, &w, Stage::Catching).0, catch, epsilon = 1e-12);

        let only_touch = RewardWeights { touch: 3.0, ..RewardWeights::zero() };
        assert_eq!(total_reward(&c, &only_touch, Stage::Catching).0, 0.0);
        let only_stab = RewardWeights { stab: 3.0, ..RewardWeights::zero() };
        assert_eq!(total_reward(&c, &only_stab, Stage::Tracking).0, 0.0);
    }

    #[test]
    fn unknown_stage_rejected() {
        assert!("juggling".parse::<Stage>().is_err());
        assert_eq!("track".parse::<Stage>().unwrap(), Stage::Tracking);
    }
}
