//! `glycemlp-net-v1` checkpoints: a JSON object with fields in the fixed
//! order `version`, `config`, `w_ih`, `w_ho`. Weights are written as the
//! shortest decimal that reads back to the same `f32`.

use std::fs;
use std::path::Path;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use super::{Network, NetworkConfig};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: &str = "glycemlp-net-v1";

#[derive(Serialize)]
struct CheckpointRef<'a> {
    version: &'static str,
    config: &'a NetworkConfig,
    w_ih: &'a [f32],
    w_ho: &'a [f32],
}

#[derive(Deserialize)]
struct CheckpointDoc {
    version: String,
    config: NetworkConfig,
    w_ih: Vec<f32>,
    w_ho: Vec<f32>,
}

impl CheckpointDoc {
    fn into_network(self) -> Result<Network> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version `{}` (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        Network::from_weights(self.config, self.w_ih, self.w_ho)
    }
}

/// Serializes as a checkpoint document, so reports can embed the network.
impl Serialize for Network {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        CheckpointRef {
            version: CHECKPOINT_VERSION,
            config: &self.config,
            w_ih: &self.w_ih,
            w_ho: &self.w_ho,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Network {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        CheckpointDoc::deserialize(deserializer)?
            .into_network()
            .map_err(de::Error::custom)
    }
}

impl Network {
    pub fn to_checkpoint_json(&self) -> Result<String> {
        if !self.weights_finite() {
            return Err(Error::Checkpoint("refusing to save non-finite weights".into()));
        }
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Network> {
        serde_json::from_str::<CheckpointDoc>(text)?.into_network()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_checkpoint_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Network> {
        Network::from_checkpoint_json(&fs::read_to_string(path)?)
    }
}
