//! Versioned JSON checkpoint. Floats are written in shortest round-trip
//! form and parsed back exactly, so save/load is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};
use crate::network::{ModelSpec, Topology};
use crate::training::TrainableParams;

pub const CHECKPOINT_FORMAT: &str = "snn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Seeds that produced a checkpoint.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLineage {
    /// Weight init and per-epoch shuffling.
    pub train_seed: u64,
    /// Synthetic data generation, when the data was synthetic.
    pub data_seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub topology: Topology,
    /// Decays before any heterogeneous training.
    pub base_model: ModelSpec,
    pub params: TrainableParams,
    pub seeds: SeedLineage,
    pub epochs: usize,
}

impl Checkpoint {
    pub fn new(
        topology: Topology,
        base_model: ModelSpec,
        params: TrainableParams,
        seeds: SeedLineage,
        epochs: usize,
    ) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            topology,
            base_model,
            params,
            seeds,
            epochs,
        }
    }

    pub fn effective_model(&self) -> Result<ModelSpec> {
        self.params.effective_model(&self.base_model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(SnnError::MalformedInput(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        ck.params.weights.check()?;
        if ck.params.weights.topology() != ck.topology {
            return Err(SnnError::Dimension(
                "checkpoint weights do not match its topology".into(),
            ));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| SnnError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| SnnError::io(path, e))?;
        Self::from_json(&text)
    }
}
