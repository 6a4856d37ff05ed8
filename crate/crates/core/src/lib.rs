// `!(x > 0.0)` is used on purpose to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamsearch;
pub mod cli;
pub mod editops;
pub mod experiment;
pub mod fixture;
pub mod metrics;
pub mod ngramlm;
pub mod numcore;
pub mod seq2seq;
pub mod synth;
pub mod textdata;
pub mod trainer;
