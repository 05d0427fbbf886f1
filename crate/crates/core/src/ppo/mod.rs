//! Proximal policy optimization with generalized advantage estimation and
//! the tracking-then-catching curriculum.

mod adam;
mod checkpoint;
mod config;
mod eval;
mod gae;
mod net;
mod normalizer;
mod rollout;
mod train;
mod update;

pub use adam::{clip_grad_norm, Adam};
pub use checkpoint::{Checkpoint, RngState, CHECKPOINT_MAGIC, FORMAT_VERSION};
pub use config::{CatchMode, PpoConfig};
pub use eval::{all_classes, evaluate, ClassReport, EvalConfig, EvalReport};
pub use gae::compute_gae;
pub use net::{env_action, ForwardPass, Layout, NetSpec, PolicyNet, Segment, INITIAL_LOG_STD, LOG_STD_MAX, LOG_STD_MIN};
pub use normalizer::Normalizer;
pub use rollout::{episode_seed, mean_terms, rollout, splitmix64, EpisodeSummary, RolloutBatch, VecEnv};
pub use train::{
    catching_start, net_spec, train_catching, train_tracking, transfer_to_catching, MetricsWriter, TrainConfig, Trainer, UpdateReport,
    METRICS_HEADER,
};
pub use update::{ppo_loss, ppo_update, LossStats, Minibatch, UpdateData};
