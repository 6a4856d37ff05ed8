//! Dense numeric core: tensors, elementwise/affine operations, Adam,
//! inverted dropout and finite-difference gradient verification.
//!
//! Backward passes are written by hand in the model code; this module only
//! supplies the building blocks and the checker that validates them.

mod gradcheck;
pub mod kernels;
mod ops;
mod params;
pub mod rng;
mod tensor;

pub use gradcheck::{grad_check, relative_error, Discrepancy, GradCheckConfig, GradCheckReport};
pub use ops::{activation, affine, cross_entropy, dropout, dropout_mask, Activation, PROB_FLOOR};
pub use params::{adam_step, AdamConfig, Gradients, ParamStore};
pub use rng::Rng;
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NumError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("numeric error: {0}")]
    NonFinite(String),
}
