//! Hierarchical spectral/attention vision backbone for pain assessment, with
//! the surrounding pipeline: latent cross-attention heads, biosignal
//! rasterization, embedding fusion and augmentation, and a desk-scale
//! multi-task training harness.

pub mod backbone;
pub mod embedding;
pub mod error;
pub mod formats;
pub mod heads;
pub mod imaging;
pub mod kernel;
pub mod nn;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
pub use kernel::{Scalar, Tensor};
