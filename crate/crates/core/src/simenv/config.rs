use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::object::{LauncherConfig, ObjectCatalog};
use crate::error::{Error, Result};
use crate::kinematics::{ArmModel, IkMethod, IkParams};
use crate::rewards::Stage;
use crate::sim2real::RandomizationRanges;

/// Per-component first-order servo time constants (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServoConfig {
    pub base_tau: f64,
    pub arm_tau: f64,
    pub hand_tau: f64,
}

impl Default for ServoConfig {
    fn default() -> Self {
        ServoConfig {
            base_tau: 0.15,
            arm_tau: 0.08,
            hand_tau: 0.04,
        }
    }
}

/// Half-widths of the action box in physical units. The policy acts in
/// `[-1, 1]` per dimension, scaled by these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionBox {
    /// m/s, each of the two planar axes.
    pub base_velocity: f64,
    /// m per control step, each axis.
    pub ee_delta: f64,
    /// rad per control step.
    pub roll_delta: f64,
    /// rad per control step, each hand joint.
    pub hand_delta: f64,
}

impl Default for ActionBox {
    fn default() -> Self {
        ActionBox {
            base_velocity: 1.5,
            ee_delta: 0.06,
            roll_delta: 0.25,
            hand_delta: 0.3,
        }
    }
}

/// Limits on the accumulated end-effector target, relative to the shoulder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkspaceConfig {
    pub max_reach: f64,
    pub min_reach: f64,
    /// Lowest target height in the arm-base frame (m).
    pub min_height: f64,
    /// Largest roll excursion from the home roll (rad).
    pub roll_range: f64,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        WorkspaceConfig {
            max_reach: 0.78,
            min_reach: 0.3,
            min_height: -0.25,
            roll_range: 1.5,
        }
    }
}

/// Touch and capture-based hold thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContactConfig {
    /// Palm-center to bounding-sphere surface distance counted as touch (m).
    pub touch_eps: f64,
    /// Object center must be this close to the palm center to be captured (m).
    pub hold_radius: f64,
    /// Hand closure needed to capture.
    pub close_threshold: f64,
    /// Hand closure below which a held object is released.
    pub open_threshold: f64,
    /// Palm-object relative speed above which the object bounces off (m/s).
    pub max_relative_speed: f64,
}

impl Default for ContactConfig {
    fn default() -> Self {
        ContactConfig {
            touch_eps: 0.03,
            hold_radius: 0.06,
            close_threshold: 0.5,
            open_threshold: 0.3,
            max_relative_speed: 6.0,
        }
    }
}

/// 16-joint hand; the first 12 are controlled, the last 4 are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandConfig {
    pub limits: [f64; 2],
    pub fixed: [f64; 4],
}

impl Default for HandConfig {
    fn default() -> Self {
        HandConfig {
            limits: [0.0, 1.6],
            fixed: [1.2, 0.3, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LpfConfig {
    pub alpha: f64,
    /// Filter base commands inside the environment during training.
    pub in_training: bool,
    /// Also filter the end-effector deltas.
    pub filter_arm: bool,
}

impl Default for LpfConfig {
    fn default() -> Self {
        LpfConfig {
            alpha: 0.9,
            in_training: true,
            filter_arm: false,
        }
    }
}

/// Everything that defines an episode world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub stage: Stage,
    pub physics_dt: f64,
    pub substeps: usize,
    pub horizon_steps: usize,
    /// Optional path to an arm model file; relative paths resolve against
    /// the env config's directory. Replaces `arm` when set.
    pub arm_model: Option<PathBuf>,
    pub arm: ArmModel,
    /// Arm base position on the mobile base (body frame, m).
    pub mount_offset: [f64; 3],
    pub ik_method: IkMethod,
    pub ik: IkParams,
    pub servo: ServoConfig,
    pub action: ActionBox,
    pub workspace: WorkspaceConfig,
    pub contact: ContactConfig,
    pub hand: HandConfig,
    pub launcher: LauncherConfig,
    pub objects: ObjectCatalog,
    pub randomize: bool,
    pub randomization: RandomizationRanges,
    pub lpf: LpfConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            stage: Stage::Tracking,
            physics_dt: 0.002,
            substeps: 20,
            horizon_steps: 63,
            arm_model: None,
            arm: ArmModel::default(),
            mount_offset: [0.1, 0.0, 0.4],
            ik_method: IkMethod::Qp,
            ik: IkParams {
                max_iterations: 15,
                ..IkParams::default()
            },
            servo: ServoConfig::default(),
            action: ActionBox::default(),
            workspace: WorkspaceConfig::default(),
            contact: ContactConfig::default(),
            hand: HandConfig::default(),
            launcher: LauncherConfig::default(),
            objects: ObjectCatalog::default(),
            randomize: true,
            randomization: RandomizationRanges::default(),
            lpf: LpfConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn control_dt(&self) -> f64 {
        self.physics_dt * self.substeps as f64
    }

    pub fn horizon_seconds(&self) -> f64 {
        self.control_dt() * self.horizon_steps as f64
    }

    pub fn with_stage(mut self, stage: Stage) -> Self {
        self.stage = stage;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.physics_dt > 0.0) || self.substeps == 0 || self.horizon_steps == 0 {
            return Err(Error::Config("physics_dt, substeps and horizon_steps must be positive".into()));
        }
        if self.mount_offset.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("mount_offset must be finite".into()));
        }
        self.ik.validate()?;
        let s = &self.servo;
        if !(s.base_tau > 0.0 && s.arm_tau > 0.0 && s.hand_tau > 0.0) {
            return Err(Error::Config("servo time constants must be positive".into()));
        }
        let a = &self.action;
        if !(a.base_velocity > 0.0 && a.ee_delta > 0.0 && a.roll_delta > 0.0 && a.hand_delta > 0.0) {
            return Err(Error::Config("action box half-widths must be positive".into()));
        }
        let w = &self.workspace;
        if !(w.max_reach > w.min_reach && w.min_reach >= 0.0 && w.roll_range > 0.0) {
            return Err(Error::Config("workspace needs max_reach > min_reach >= 0".into()));
        }
        let c = &self.contact;
        if !(c.touch_eps >= 0.0 && c.hold_radius > 0.0 && c.max_relative_speed > 0.0)
            || !(0.0..=1.0).contains(&c.close_threshold)
            || !(c.open_threshold <= c.close_threshold && c.open_threshold >= 0.0)
        {
            return Err(Error::Config(format!("invalid contact thresholds {c:?}")));
        }
        if !(self.hand.limits[0] < self.hand.limits[1]) {
            return Err(Error::Config("hand limits need lower < upper".into()));
        }
        if !(0.0..1.0).contains(&self.lpf.alpha) {
            return Err(Error::Config("lpf.alpha must lie in [0, 1)".into()));
        }
        self.launcher.validate()?;
        self.objects.validate()?;
        self.randomization.validate()
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg: EnvConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        if let Some(rel) = &cfg.arm_model {
            let path = match origin.parent() {
                Some(dir) if rel.is_relative() => dir.join(rel),
                _ => rel.clone(),
            };
            cfg.arm = ArmModel::load(&path)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("env config serializes")
    }
}
