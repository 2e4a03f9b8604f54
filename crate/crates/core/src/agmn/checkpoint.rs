use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Agmn;
use crate::error::{Error, Result};
use crate::features::{NormalizationStats, LAYOUT_VERSION};
use crate::nn::{Adam, Real};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Serialized model. Weights are stored as `f64` decimals; `f32` models
/// round-trip exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub layout_version: String,
    pub model: Agmn<f64>,
    pub normalization: Option<NormalizationStats>,
    #[serde(default)]
    pub optimizer: Option<Adam<f64>>,
    #[serde(default)]
    pub train_steps: u64,
}

impl Checkpoint {
    pub fn new<T: Real>(model: &Agmn<T>, normalization: Option<NormalizationStats>) -> Self {
        Self {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            layout_version: LAYOUT_VERSION.to_string(),
            model: model.cast(),
            normalization,
            optimizer: None,
            train_steps: 0,
        }
    }

    pub fn with_optimizer<T: Real>(mut self, adam: &Adam<T>) -> Self {
        self.optimizer = Some(adam.cast());
        self.train_steps = adam.t;
        self
    }

    pub fn model<T: Real>(&self) -> Result<Agmn<T>> {
        Ok(self.model.cast())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!("unsupported checkpoint schema {}", self.schema_version)));
        }
        if let Some(n) = &self.normalization {
            if n.layout != self.layout_version || n.mean.len() != self.model.feature_dim {
                return Err(Error::LayoutMismatch { expected: self.layout_version.clone(), found: n.layout.clone() });
            }
        }
        self.model.validate()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
