use serde::{Deserialize, Serialize};

use super::config::ActionBox;
use crate::error::{Error, Result};
use crate::rewards::Stage;

pub const HAND_DOF: usize = 12;
pub const HAND_FIXED: usize = 4;
/// Base (2) + EE delta (3) + roll (1).
pub const ARM_ACTION_DIM: usize = 6;
pub const FULL_ACTION_DIM: usize = ARM_ACTION_DIM + HAND_DOF;
/// Index of the roll command in the flattened action.
pub const ROLL_INDEX: usize = 5;
/// Object t, t-1 (6) + EE t, t-1 (6) + base velocity (2).
pub const TRACKING_OBS_DIM: usize = 14;
pub const FULL_OBS_DIM: usize = TRACKING_OBS_DIM + HAND_DOF;

pub fn action_dim(stage: Stage) -> usize {
    match stage {
        Stage::Tracking => ARM_ACTION_DIM,
        Stage::Catching => FULL_ACTION_DIM,
    }
}

/// Policy input. Positions are in the arm-base frame: origin at the arm
/// mount, axes aligned with the mobile base body frame (x forward, z up).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub object: [f64; 3],
    pub object_prev: [f64; 3],
    pub ee: [f64; 3],
    pub ee_prev: [f64; 3],
    /// Body-frame planar velocity of the base (m/s).
    pub base_velocity: [f64; 2],
    /// Controlled hand joint positions; absent in the tracking stage.
    pub hand: Option<[f64; HAND_DOF]>,
}

impl Observation {
    /// Flatten to the full-size layout used by the policy trunk. Tracking
    /// observations zero-pad the hand slots.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(FULL_OBS_DIM);
        self.write_into(&mut v);
        v
    }

    pub fn write_into(&self, v: &mut Vec<f64>) {
        v.extend_from_slice(&self.object);
        v.extend_from_slice(&self.object_prev);
        v.extend_from_slice(&self.ee);
        v.extend_from_slice(&self.ee_prev);
        v.extend_from_slice(&self.base_velocity);
        match &self.hand {
            Some(h) => v.extend_from_slice(h),
            None => v.extend(std::iter::repeat_n(0.0, HAND_DOF)),
        }
    }
}

/// Whole-body command in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    /// Body-frame planar velocity (m/s).
    pub base_velocity: [f64; 2],
    /// End-effector target increment in the arm-base frame (m).
    pub ee_delta: [f64; 3],
    /// Palm roll increment (rad).
    pub roll_delta: f64,
    /// Hand joint target increments (rad).
    pub hand_delta: [f64; HAND_DOF],
}

impl Action {
    /// Build from a normalized `[-1, 1]` vector of length 6 or 18. Values are
    /// scaled by the box; clamping happens at execution.
    pub fn from_normalized(a: &[f64], bounds: &ActionBox) -> Result<Self> {
        if a.len() != ARM_ACTION_DIM && a.len() != FULL_ACTION_DIM {
            return Err(Error::Dimension {
                expected: FULL_ACTION_DIM,
                actual: a.len(),
            });
        }
        let mut hand_delta = [0.0; HAND_DOF];
        if a.len() == FULL_ACTION_DIM {
            for (h, x) in hand_delta.iter_mut().zip(&a[ARM_ACTION_DIM..]) {
                *h = x * bounds.hand_delta;
            }
        }
        Ok(Action {
            base_velocity: [a[0] * bounds.base_velocity, a[1] * bounds.base_velocity],
            ee_delta: [a[2] * bounds.ee_delta, a[3] * bounds.ee_delta, a[4] * bounds.ee_delta],
            roll_delta: a[5] * bounds.roll_delta,
            hand_delta,
        })
    }

    /// Normalized 18-vector, clamped to `[-1, 1]`.
    pub fn normalized(&self, bounds: &ActionBox) -> [f64; FULL_ACTION_DIM] {
        let mut out = [0.0; FULL_ACTION_DIM];
        out[0] = self.base_velocity[0] / bounds.base_velocity;
        out[1] = self.base_velocity[1] / bounds.base_velocity;
        for i in 0..3 {
            out[2 + i] = self.ee_delta[i] / bounds.ee_delta;
        }
        out[ROLL_INDEX] = self.roll_delta / bounds.roll_delta;
        for i in 0..HAND_DOF {
            out[ARM_ACTION_DIM + i] = self.hand_delta[i] / bounds.hand_delta;
        }
        out.map(|v| v.clamp(-1.0, 1.0))
    }

    pub fn is_finite(&self) -> bool {
        self.base_velocity.iter().all(|v| v.is_finite())
            && self.ee_delta.iter().all(|v| v.is_finite())
            && self.roll_delta.is_finite()
            && self.hand_delta.iter().all(|v| v.is_finite())
    }
}

/// Hand joint state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandState {
    pub joints: [f64; HAND_DOF],
    pub targets: [f64; HAND_DOF],
    pub fixed: [f64; HAND_FIXED],
}

impl HandState {
    pub fn open(limits: [f64; 2], fixed: [f64; HAND_FIXED]) -> Self {
        HandState {
            joints: [limits[0]; HAND_DOF],
            targets: [limits[0]; HAND_DOF],
            fixed,
        }
    }

    /// Mean normalized flexion of the controlled joints, in [0, 1].
    pub fn closure(&self, limits: [f64; 2]) -> f64 {
        let span = limits[1] - limits[0];
        let sum: f64 = self.joints.iter().map(|q| ((q - limits[0]) / span).clamp(0.0, 1.0)).sum();
        sum / HAND_DOF as f64
    }
}

/// Outcome flags of one episode so far.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    /// The palm touched the object while it was airborne.
    pub touched: bool,
    /// The object was held at the episode horizon.
    pub caught: bool,
    /// Control steps that ended with the object held.
    pub steps_held: u32,
    /// Running minimum palm-to-object distance (m).
    pub closest_distance: f64,
    /// The episode was terminated because of a non-finite action.
    pub fault: bool,
}
