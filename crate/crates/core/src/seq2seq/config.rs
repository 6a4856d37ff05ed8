use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::textdata::VOCAB_SIZE;

/// How attention scores become weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AttentionNorm {
    /// `α = softmax(u)`.
    #[default]
    Softmax,
    /// `α_k = u_k / Σ_j u_j`, without exponentiation. Undefined when the
    /// scores sum to zero; kept for experiments only.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Encoder layers; each layer after the first halves the sequence.
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub hidden: usize,
    /// Character embedding width.
    pub embedding: usize,
    pub vocab: usize,
    pub dropout: f64,
    #[serde(default)]
    pub attention: AttentionNorm,
    /// Half-width of the uniform weight initialization.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
}

fn default_init_scale() -> f64 {
    0.1
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder_layers: 3,
            decoder_layers: 3,
            hidden: 400,
            embedding: 400,
            vocab: VOCAB_SIZE,
            dropout: 0.15,
            attention: AttentionNorm::Softmax,
            init_scale: 0.1,
        }
    }
}

impl ModelConfig {
    /// Square model with embedding width equal to the hidden size.
    pub fn small(hidden: usize, encoder_layers: usize, decoder_layers: usize) -> Self {
        ModelConfig {
            encoder_layers,
            decoder_layers,
            hidden,
            embedding: hidden,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.encoder_layers == 0 || self.decoder_layers == 0 || self.hidden == 0 || self.embedding == 0 {
            return Err(ModelError::Config(format!(
                "layer counts and sizes must be positive: {self:?}"
            )));
        }
        if self.vocab != VOCAB_SIZE {
            return Err(ModelError::Config(format!(
                "vocabulary size must be {VOCAB_SIZE}, got {}",
                self.vocab
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.init_scale > 0.0) {
            return Err(ModelError::Config("init_scale must be positive".into()));
        }
        Ok(())
    }

    /// Number of encoder states for a source of `len` symbols (after
    /// padding to a multiple of `2^(N-1)`).
    pub fn encoded_len(&self, len: usize) -> usize {
        let unit = 1usize << (self.encoder_layers - 1);
        len.max(1).div_ceil(unit)
    }
}
