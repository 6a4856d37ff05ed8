use rand::Rng as _;

use super::kernels;
use super::rng::Rng;
use super::{NumError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sigmoid,
    Relu,
    /// Normalizes over the last axis.
    Softmax,
}

/// `W x + b` for `W: m×n`, `b: m`, `x: n`.
pub fn affine(w: &Tensor, b: &Tensor, x: &Tensor) -> Result<Tensor, NumError> {
    if w.shape().len() != 2 {
        return Err(NumError::Dimension(format!(
            "affine: weight must be a matrix, got {:?}",
            w.shape()
        )));
    }
    let (m, n) = (w.shape()[0], w.shape()[1]);
    if b.shape() != [m] || x.shape() != [n] {
        return Err(NumError::Dimension(format!(
            "affine: weight {:?}, bias {:?}, input {:?} do not conform",
            w.shape(),
            b.shape(),
            x.shape()
        )));
    }
    let mut out = vec![0.0; m];
    kernels::affine_into(w.data(), b.data(), x.data(), &mut out);
    Tensor::from_vec(&[m], out)
}

pub fn activation(kind: Activation, x: &Tensor) -> Result<Tensor, NumError> {
    if x.is_empty() {
        return Err(NumError::Argument("activation of an empty tensor".into()));
    }
    let mut out = x.clone();
    match kind {
        Activation::Tanh => out.data_mut().iter_mut().for_each(|v| *v = v.tanh()),
        Activation::Sigmoid => out.data_mut().iter_mut().for_each(|v| *v = kernels::sigmoid(*v)),
        Activation::Relu => out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0)),
        Activation::Softmax => {
            let cols = x.cols();
            out.data_mut()
                .chunks_exact_mut(cols)
                .for_each(kernels::softmax_in_place);
        }
    }
    Ok(out)
}

/// Probabilities are clamped here before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// `-ln probs[target]`, with the probability clamped at [`PROB_FLOOR`].
pub fn cross_entropy(probs: &Tensor, target: usize) -> Result<f64, NumError> {
    if target >= probs.len() {
        return Err(NumError::Argument(format!(
            "target {target} out of range for {} classes",
            probs.len()
        )));
    }
    Ok(-probs.data()[target].max(PROB_FLOOR).ln())
}

/// Draws an inverted-dropout mask: each entry is 0 with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut Rng) -> Result<Vec<f64>, NumError> {
    check_rate(rate)?;
    let keep = 1.0 / (1.0 - rate);
    Ok((0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect())
}

/// Inverted dropout. With `training == false` (or `rate == 0`) the input
/// is returned unchanged and no randomness is consumed.
pub fn dropout(x: &Tensor, rate: f64, rng: &mut Rng, training: bool) -> Result<Tensor, NumError> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.len(), rate, rng)?;
    let mut out = x.clone();
    out.data_mut().iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
    Ok(out)
}

fn check_rate(rate: f64) -> Result<(), NumError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NumError::Argument(format!("dropout rate {rate} outside [0, 1)")));
    }
    Ok(())
}
