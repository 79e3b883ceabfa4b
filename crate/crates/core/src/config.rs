//! Run configuration shared by the CLI subcommands, and canonical JSON.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::GenConfig;
use crate::error::{Error, Result};
use crate::eval::{check_threshold, DEFAULT_THRESHOLD, THRESHOLD_SWEEP};
use crate::nn::{NetworkConfig, Precision, TrainOptions};

/// Pretty-printed JSON with object keys sorted, so equal values always
/// serialize to identical bytes.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Value keeps keys in a BTreeMap without `preserve_order`.
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&v)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub precision: Precision,
}

impl TrainingConfig {
    pub fn options(&self) -> TrainOptions {
        TrainOptions {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub threshold: f64,
    pub sweep: Vec<f64>,
    pub mask_utilized: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { threshold: DEFAULT_THRESHOLD, sweep: THRESHOLD_SWEEP.to_vec(), mask_utilized: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub generation: GenConfig,
    pub network: NetworkConfig,
    pub training: TrainingConfig,
    #[serde(default)]
    pub evaluation: EvalConfig,
}

impl RunConfig {
    /// Full-size configuration: 225,225 single-label and 450,000 multi-label
    /// snapshots, the reference network, 200 epochs at batch 256.
    pub fn paper() -> Self {
        RunConfig {
            generation: GenConfig::paper(),
            network: NetworkConfig::paper(),
            training: TrainingConfig {
                epochs: 200,
                batch_size: 256,
                learning_rate: 0.001,
                seed: 42,
                precision: Precision::F32,
            },
            evaluation: EvalConfig::default(),
        }
    }

    /// Desktop-sized configuration used by the acceptance suite.
    pub fn desk() -> Self {
        RunConfig {
            generation: GenConfig::desk(),
            network: NetworkConfig::desk(),
            training: TrainingConfig { epochs: 20, batch_size: 128, ..RunConfig::paper().training },
            evaluation: EvalConfig::default(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(RunConfig::paper()),
            "desk" => Ok(RunConfig::desk()),
            other => Err(Error::InvalidConfig(format!("unknown preset {other:?} (expected paper or desk)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generation.validate()?;
        self.network.shapes().map_err(|e| Error::InvalidConfig(format!("network: {e}")))?;
        self.training.options().validate()?;
        check_threshold(self.evaluation.threshold).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for &t in &self.evaluation.sweep {
            check_threshold(t).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
