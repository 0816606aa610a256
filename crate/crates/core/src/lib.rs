//! Learning continuous style representations of images.
//!
//! The crate bundles a small autodiff tensor library ([`tensor`]), the
//! convolutional VAE / frozen feature network / style head definitions
//! ([`nets`]), the training objectives ([`losses`]), corpus handling and a
//! synthetic style corpus ([`data`]), the training loop and checkpoint format
//! ([`train`]), latent-space analysis ([`analysis`]) and gradient-weighted
//! activation maps ([`explain`]).

pub mod analysis;
pub mod data;
pub mod error;
pub mod explain;
pub mod losses;
pub mod nets;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Graph, Tensor, Var};
