//! Character-level encoder-decoder with attention.
//!
//! The encoder is a stack of bidirectional GRU layers whose forward and
//! backward states are summed. Every layer after the first consumes the
//! previous layer's outputs two at a time, reduced by an affine map and
//! `tanh`, so `N` layers shrink a source of length `T` to
//! `⌈T / 2^(N-1)⌉` context vectors.
//!
//! The decoder is a stack of `M` GRU layers fed with the previous
//! character. Its top state queries the contexts through two `tanh`
//! projections and a dot product; the attended vector and the top state
//! go through a ReLU combiner and a softmax projection.

mod config;
mod gru;
mod model;

pub use config::{AttentionNorm, ModelConfig};
pub use model::{argmax, parameter_manifest, DecoderState, EncodedSource, PairScore, Phase, Seq2Seq};

use crate::numcore::{NumError, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("numeric error: {0}")]
    NonFinite(String),
}

impl From<NumError> for ModelError {
    fn from(e: NumError) -> Self {
        match e {
            NumError::Dimension(m) => ModelError::Dimension(m),
            NumError::Argument(m) => ModelError::Argument(m),
            NumError::NonFinite(m) => ModelError::NonFinite(m),
        }
    }
}

/// Packed GRU parameters: `w` is `3H × D`, `u` is `3H × H`, `b` is `3H`,
/// with gate blocks in the order update, reset, candidate.
#[derive(Debug, Clone)]
pub struct GruParams {
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
}

/// One GRU step on tensors.
pub fn gru_cell(h_prev: &Tensor, x: &Tensor, p: &GruParams) -> Result<Tensor, ModelError> {
    let h = h_prev.len();
    let d = x.len();
    if p.w.shape() != [3 * h, d] || p.u.shape() != [3 * h, h] || p.b.shape() != [3 * h] {
        return Err(ModelError::Dimension(format!(
            "gru_cell: h_prev {:?}, x {:?}, w {:?}, u {:?}, b {:?}",
            h_prev.shape(),
            x.shape(),
            p.w.shape(),
            p.u.shape(),
            p.b.shape()
        )));
    }
    let step = gru::forward(
        gru::GruWeights {
            w: p.w.data(),
            u: p.u.data(),
            b: p.b.data(),
        },
        x.data().to_vec(),
        h_prev.data().to_vec(),
    );
    Ok(Tensor::vector(&step.h))
}
