//! Repository-wide defaults and the generation-side configuration.

use alloc::format;
use alloc::string::String;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Embedding dimension used when a repository does not configure one.
pub const DEFAULT_DIM: usize = 512;
/// Default number of hits returned by a search (one row of six examples).
pub const DEFAULT_K: usize = 6;
/// Seed for every seeded generator unless overridden.
pub const DEFAULT_SEED: u64 = 42;
/// Items per embedding batch / wire call.
pub const DEFAULT_BATCH: usize = 32;
/// Cosine similarity at or above which two screenshots are considered copies.
pub const DEFAULT_DEDUP_THRESHOLD: f64 = 0.999;

pub const MIN_TEMPERATURE: f64 = 0.0;
pub const MAX_TEMPERATURE: f64 = 2.0;

/// Settings for one call against an external generation endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub temperature: f64,
    pub batch_size: usize,
    pub endpoint: String,
}

impl GenConfig {
    pub fn new(temperature: f64, batch_size: usize, endpoint: impl Into<String>) -> Result<Self, CoreError> {
        let cfg = GenConfig {
            temperature,
            batch_size,
            endpoint: endpoint.into(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Temperature must lie in `[0, 2]` and batches hold at least one image.
    pub fn validate(&self) -> Result<(), CoreError> {
        if !(MIN_TEMPERATURE..=MAX_TEMPERATURE).contains(&self.temperature) {
            return Err(CoreError::InvalidConfig(format!(
                "temperature {} outside [{MIN_TEMPERATURE}, {MAX_TEMPERATURE}]",
                self.temperature
            )));
        }
        if self.batch_size == 0 {
            return Err(CoreError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.endpoint.trim().is_empty() {
            return Err(CoreError::InvalidConfig("endpoint is empty".into()));
        }
        Ok(())
    }
}
