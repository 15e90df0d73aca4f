//! Convolutional-attention history encoding for partially observable control.

pub mod agent;
pub mod encoder;
pub mod envs;
pub mod error;
pub mod harness;
pub mod nn;
pub mod pomdp;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
