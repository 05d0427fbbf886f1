//! Simulator and reinforcement-learning workbench for whole-body catching of
//! thrown objects with an omnidirectional base, a 6-DoF arm and a 12-DoF hand.
//!
//! The crate is organised bottom-up:
//!
//! * [`kinematics`]: arm forward/inverse kinematics (damped least squares and a
//!   box-constrained QP with null-space joint-limit avoidance) and planar base
//!   integration.
//! * [`simenv`]: the episode world. Object launching, 500 Hz physics under a
//!   25 Hz control loop, servo tracking, touch/hold adjudication, observations.
//! * [`rewards`]: the seven shaped reward terms and their stage-dependent sum.
//! * [`sim2real`]: action low-pass filtering, domain randomization and noise.
//! * [`ppo`]: actor-critic PPO with GAE and the tracking-then-catching curriculum.
//! * [`cli`]: config loading, training/evaluation/replay commands and reports.

pub mod cli;
pub mod error;
pub mod kinematics;
pub mod ppo;
pub mod rewards;
pub mod sim2real;
pub mod simenv;

pub use error::{Error, Result};

/// Directory holding the bundled default configuration files.
pub fn default_config_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}
