//! The Squeeze Reasoning block.
//!
//! A feature map is reduced to `c_in / ratio` channels and squeezed to one
//! vector per image, either by average pooling or by Hadamard-product
//! pooling of two projections. The vector is split into `k` contiguous
//! groups of `m` channels, which form the nodes of a small graph. One graph
//! convolution (learned adjacency, or an adjacency computed from node
//! correlations) refines the nodes, and the result is projected back to a
//! per-channel gate that rescales the input before a residual add.

mod block;
mod config;
mod nodes;
mod reason;
mod reconstruct;
mod squeeze;
mod weights;

pub use block::{sr_backward, sr_backward_from_trace, sr_forward, sr_trace, SrGrads, SrTrace};
pub use config::{GateActivation, ReasoningKind, SqueezeKind, SrConfig, DEFAULT_NODES, DEFAULT_RATIO};
pub use nodes::NodeMatrix;
pub use reason::{reason_correlation, reason_learned, CorrelationTrace, LearnedTrace, ReasonTrace};
pub use reconstruct::{reconstruct, ReconstructTrace};
pub use squeeze::{bilinear_pool_reference, squeeze_gap, squeeze_ghp};
pub use weights::{init_weights, ReasoningWeights, SrWeights};
