use std::io::Write;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::config::CatchMode;
use super::net::{Layout, NetSpec, PolicyNet};
use super::normalizer::Normalizer;
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::rewards::Stage;

pub const CHECKPOINT_MAGIC: &str = "DEXCATCH-CHECKPOINT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngState {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

/// Complete training state. Stored as a magic line followed by one JSON
/// document; floats round-trip exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub stage: Stage,
    pub mode: CatchMode,
    pub spec: NetSpec,
    pub layout: Layout,
    pub params: Vec<f64>,
    pub normalizer: Normalizer,
    pub adam: Adam,
    pub config: TrainConfig,
    pub rng: RngState,
    pub env_steps: u64,
    pub updates: u64,
}

impl Checkpoint {
    pub fn net(&self) -> Result<PolicyNet> {
        if Layout::for_spec(&self.spec) != self.layout || self.layout.len() != self.params.len() {
            return Err(Error::Checkpoint("parameter layout does not match the network shape".into()));
        }
        Ok(PolicyNet {
            spec: self.spec.clone(),
            layout: self.layout.clone(),
            params: self.params.clone(),
            normalizer: self.normalizer.clone(),
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = format!("{CHECKPOINT_MAGIC} {FORMAT_VERSION}\n").into_bytes();
        serde_json::to_writer(&mut out, self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let split = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
        let header = std::str::from_utf8(&bytes[..split]).map_err(|_| Error::Checkpoint("header is not UTF-8".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(CHECKPOINT_MAGIC) {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Checkpoint("missing format version".into()))?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let ckpt: Checkpoint = serde_json::from_slice(&bytes[split + 1..]).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ckpt.format_version != version {
            return Err(Error::Checkpoint("header and body versions differ".into()));
        }
        ckpt.net()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
