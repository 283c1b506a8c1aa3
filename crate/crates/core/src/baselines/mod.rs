//! Comparison blocks: squeeze-and-excitation channel gating and the
//! embedded-Gaussian non-local block.

mod nonlocal;
mod se;

pub use nonlocal::{
    nonlocal_backward, nonlocal_forward, nonlocal_forward_tiled, nonlocal_trace, NlGrads, NlTrace,
    NlWeights,
};
pub use se::{se_backward, se_forward, se_trace, SeGrads, SeTrace, SeWeights, DEFAULT_SE_REDUCTION};
