//! Squeeze Reasoning block and its comparison baselines on a small dense
//! tensor engine.
//!
//! * [`Tensor`] and [`ops`]: NCHW tensors and primitive kernels, each with a
//!   hand-written backward.
//! * [`sr`]: the squeeze / node-reasoning / reconstruction block.
//! * [`baselines`]: squeeze-and-excitation and non-local blocks.
//! * [`cost`]: closed-form FLOP, parameter and affinity-memory counts.
//! * [`gradcheck`]: central finite-difference oracle.
//! * [`format`] and [`checkpoint`]: `SRT1` tensor files and weight manifests.

pub mod baselines;
pub mod blocks;
pub mod checkpoint;
pub mod cost;
pub mod counter;
mod error;
pub mod format;
pub mod gradcheck;
pub mod op_result;
pub mod ops;
mod scalar;
pub mod sr;
mod tensor;

pub use blocks::{BlockCase, BlockWeights};
pub use counter::OpCount;
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::{Tensor, MAX_RANK};
