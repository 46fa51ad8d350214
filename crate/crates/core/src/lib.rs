//! Weight-modulated rotary embeddings, source-to-target shared attention
//! and an adaptive scheduling loop for training-free non-rigid editing,
//! run on a small deterministic diffusion-transformer stand-in.

pub mod attention;
pub mod backbone;
pub mod cli;
pub mod error;
pub mod measurement;
pub mod numerics;
pub mod pipeline;
pub mod rope;

pub use error::{Error, Result};
