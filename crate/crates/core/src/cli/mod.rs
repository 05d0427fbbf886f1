//! Command-line front end: run configuration, the train/eval/replay/plotdata
//! commands and their on-disk artifacts.

mod app;
mod commands;
mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ppo::{CatchMode, EvalConfig, PpoConfig, TrainConfig};
use crate::rewards::{Stage, StageWeights};
use crate::simenv::EnvConfig;

pub use app::{main_with_args, Cli, Command};
pub use commands::{
    cmd_eval, cmd_plotdata, cmd_replay, cmd_train, run_dir, EvalOptions, PlotOptions, PlotSummary, ReplayOptions,
    ReplaySummary, TrainOptions, TrainSummary,
};
pub use report::{summarize, ClassSummary, EvalSummary};

/// Stage plus curriculum mode, written `track`, `track:no-roll`,
/// `catch:two-stage`, `catch:one-stage` or `catch:no-roll`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selector {
    pub stage: Stage,
    pub mode: CatchMode,
}

impl Default for Selector {
    fn default() -> Self {
        Selector {
            stage: Stage::Tracking,
            mode: CatchMode::TwoStage,
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.stage, self.mode) {
            (Stage::Tracking, CatchMode::TwoStage) => f.write_str("track"),
            (Stage::Tracking, m) => write!(f, "track:{m}"),
            (Stage::Catching, m) => write!(f, "catch:{m}"),
        }
    }
}

impl FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (stage, mode) = match s.split_once(':') {
            Some((a, b)) => (a.parse()?, b.parse()?),
            None => (s.parse()?, CatchMode::TwoStage),
        };
        Ok(Selector { stage, mode })
    }
}

impl Serialize for Selector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Selector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Top-level run file. Paths are relative to the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: Option<PathBuf>,
    pub ppo: Option<PathBuf>,
    pub rewards: Option<PathBuf>,
    pub stage: Selector,
    pub seed: u64,
    /// Env-step budget of this stage; overrides `ppo.total_steps`.
    pub steps: Option<u64>,
    pub out: PathBuf,
    /// Write a checkpoint every this many updates (0: only the final one).
    pub checkpoint_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: None,
            ppo: None,
            rewards: None,
            stage: Selector::default(),
            seed: 0,
            steps: None,
            out: PathBuf::from("runs"),
            checkpoint_every: 25,
        }
    }
}

/// Contents of the PPO config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoFile {
    pub ppo: PpoConfig,
    pub eval: EvalConfig,
}

fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| as_config_error(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn as_config_error(path: &Path, e: std::io::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

impl RunConfig {
    /// Read the run file and every file it references. Missing references
    /// fall back to built-in defaults.
    pub fn load(path: &Path) -> Result<(RunConfig, TrainConfig)> {
        let mut run: RunConfig = parse_toml(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &Option<PathBuf>| p.as_ref().map(|p| if p.is_relative() { dir.join(p) } else { p.clone() });
        run.env = resolve(&run.env);
        run.ppo = resolve(&run.ppo);
        run.rewards = resolve(&run.rewards);
        if run.out.is_relative() {
            run.out = dir.join(&run.out);
        }
        let train = run.train_config()?;
        Ok((run, train))
    }

    /// Assemble the training configuration from the referenced files.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let env = match &self.env {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| as_config_error(p, e))?;
                EnvConfig::from_toml_str(&text, p)?
            }
            None => EnvConfig::default(),
        };
        let PpoFile { mut ppo, eval } = match &self.ppo {
            Some(p) => parse_toml(p)?,
            None => PpoFile::default(),
        };
        let rewards: StageWeights = match &self.rewards {
            Some(p) => parse_toml(p)?,
            None => StageWeights::default(),
        };
        ppo.seed = self.seed;
        if let Some(steps) = self.steps {
            ppo.total_steps = steps;
        }
        let cfg = TrainConfig {
            ppo,
            env,
            rewards,
            eval,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of the canonical JSON form of a training configuration.
pub fn config_digest(cfg: &TrainConfig) -> String {
    sha256_hex(&serde_json::to_vec(cfg).expect("config serializes"))
}

/// Reproducibility record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub stage: Selector,
    pub seed: u64,
    pub config_digest: String,
    pub env_steps: u64,
    pub updates: u64,
    /// Digest of the checkpoint the command produced or consumed.
    pub checkpoint_digest: Option<String>,
    pub config: TrainConfig,
}

impl Manifest {
    pub fn new(command: &str, stage: Selector, config: &TrainConfig) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            stage,
            seed: config.ppo.seed,
            config_digest: config_digest(config),
            env_steps: 0,
            updates: 0,
            checkpoint_digest: None,
            config: config.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub(crate) fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selector_round_trip() {
        for s in ["track", "track:no-roll", "catch:two-stage", "catch:one-stage", "catch:no-roll"] {
            let sel: Selector = s.parse().unwrap();
            assert_eq!(sel.to_string(), s);
        }
        assert_eq!("catch".parse::<Selector>().unwrap().mode, CatchMode::TwoStage);
        assert!("throw".parse::<Selector>().is_err());
        assert!("catch:three-stage".parse::<Selector>().is_err());
    }

    #[test]
    fn run_file_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("ppo.toml"), "[ppo]\nnum_envs = 3\n[eval]\nepisodes = 7\n").unwrap();
        std::fs::write(dir.path().join("rewards.toml"), "[tracking]\ntouch = 2.0\n").unwrap();
        std::fs::write(
            dir.path().join("run.toml"),
            "ppo = \"ppo.toml\"\nrewards = \"rewards.toml\"\nstage = \"catch:no-roll\"\nseed = 4\nsteps = 99\nout = \"o\"\n",
        )
        .unwrap();
        let (run, cfg) = RunConfig::load(&dir.path().join("run.toml")).unwrap();
        assert_eq!(run.out, dir.path().join("o"));
        assert_eq!(run.stage.mode, CatchMode::NoRoll);
        assert_eq!(cfg.ppo.num_envs, 3);
        assert_eq!(cfg.ppo.seed, 4);
        assert_eq!(cfg.ppo.total_steps, 99);
        assert_eq!(cfg.eval.episodes, 7);
        assert_eq!(cfg.rewards.tracking.touch, 2.0);
        assert_eq!(cfg.rewards.catching, Default::default());
    }

    #[test]
    fn bad_files_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let run = dir.path().join("run.toml");
        std::fs::write(&run, "stage = \"track\"\nbogus = 1\n").unwrap();
        assert_eq!(RunConfig::load(&run).unwrap_err().exit_code(), 2);
        std::fs::write(dir.path().join("ppo.toml"), "[ppo]\nclip = -1.0\n").unwrap();
        std::fs::write(&run, "ppo = \"ppo.toml\"\n").unwrap();
        assert_eq!(RunConfig::load(&run).unwrap_err().exit_code(), 2);
        assert_eq!(RunConfig::load(&dir.path().join("missing.toml")).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn digest_tracks_config() {
        let a = TrainConfig::default();
        let mut b = a.clone();
        assert_eq!(config_digest(&a), config_digest(&b));
        b.ppo.seed = 1;
        assert_ne!(config_digest(&a), config_digest(&b));
        assert_eq!(config_digest(&a).len(), 64);
    }
}
