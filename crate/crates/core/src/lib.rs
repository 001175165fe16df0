//! Waveformer neural operator: reverse-mode tensors, orthonormal Daubechies
//! wavelets, transformer attention, the wavelet/physical two-branch operator
//! with its baselines, training and autoregressive rollout.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the double-precision instantiation used by the CLI and tests.

pub mod attention;
pub mod data;
pub mod error;
pub mod model;
pub mod rng;
pub mod rollout;
pub mod scalar;
pub mod tensor;
pub mod training;
pub mod wavelet;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor = tensor::Tensor<f64>;
pub type Tape = tensor::Tape<f64>;
pub type TensorF32 = tensor::Tensor<f32>;
pub type TapeF32 = tensor::Tape<f32>;
pub type ParamStore = model::ParamStore<f64>;
pub type WaveletFilter = wavelet::WaveletFilter<f64>;
