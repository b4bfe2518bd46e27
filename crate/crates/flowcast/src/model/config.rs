//! Model hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Width of flow/queue/link embeddings.
    pub embedding_dim: usize,
    /// Message-passing iterations per window.
    pub mpa_iterations: usize,
    /// Temporal window length the model was trained for.
    pub window_length_s: f64,
    /// Hidden width of the three encoder MLPs (two layers each).
    pub encoder_hidden: usize,
    /// Hidden width of the readout MLP (three layers, softplus output).
    pub readout_hidden: usize,
    /// When false, queue embeddings are re-encoded every window instead of
    /// flowing through the inter-window GRU. Exists for stationarity tests;
    /// leave on for real use.
    pub inter_window_memory: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 32,
            mpa_iterations: 8,
            window_length_s: 0.1,
            encoder_hidden: 32,
            readout_hidden: 32,
            inter_window_memory: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim < 1 {
            return Err(Error::config("embedding_dim must be >= 1"));
        }
        if self.mpa_iterations < 1 {
            return Err(Error::config("mpa_iterations must be >= 1"));
        }
        if self.window_length_s <= 0.0 {
            return Err(Error::config("window_length_s must be > 0"));
        }
        if self.encoder_hidden < 1 || self.readout_hidden < 1 {
            return Err(Error::config("hidden widths must be >= 1"));
        }
        Ok(())
    }

    /// Small configuration for tests and gradient checks.
    pub fn tiny() -> Self {
        Self {
            embedding_dim: 4,
            mpa_iterations: 2,
            window_length_s: 0.1,
            encoder_hidden: 4,
            readout_hidden: 4,
            inter_window_memory: true,
        }
    }
}
