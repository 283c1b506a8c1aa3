//! One enum over the three runnable blocks, so callers (gradient checks,
//! golden files, benchmarks) can treat them uniformly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, NlWeights, SeWeights};
use crate::error::{Error, Result};
use crate::gradcheck::{self, CheckOptions, CheckReport, Param};
use crate::scalar::Scalar;
use crate::sr::{self, SrConfig, SrWeights};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "block", rename_all = "lowercase")]
pub enum BlockCase {
    Sr(SrConfig),
    Se { c_in: usize, reduction: usize },
    Nl { c_in: usize },
}

impl BlockCase {
    pub fn c_in(&self) -> usize {
        match *self {
            BlockCase::Sr(cfg) => cfg.c_in,
            BlockCase::Se { c_in, .. } | BlockCase::Nl { c_in } => c_in,
        }
    }

    pub fn label(&self) -> String {
        match self {
            BlockCase::Sr(cfg) => cfg.label(),
            BlockCase::Se { .. } => "se".into(),
            BlockCase::Nl { .. } => "nl".into(),
        }
    }

    /// Dense random weights: every tensor nonzero, so every gradient path is live.
    pub fn random_weights(&self, seed: u64) -> Result<BlockWeights> {
        Ok(match *self {
            BlockCase::Sr(cfg) => BlockWeights::Sr(SrWeights::random(&cfg, seed)?),
            BlockCase::Se { c_in, reduction } => BlockWeights::Se(SeWeights::init(c_in, reduction, seed)?),
            BlockCase::Nl { c_in } => BlockWeights::Nl(NlWeights::init(c_in, seed)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BlockWeights<T: Scalar = f64> {
    Sr(SrWeights<T>),
    Se(SeWeights<T>),
    Nl(NlWeights<T>),
}

impl<T: Scalar> BlockWeights<T> {
    pub fn named(&self) -> Vec<(&'static str, &Tensor<T>)> {
        match self {
            BlockWeights::Sr(w) => w.named(),
            BlockWeights::Se(w) => w.named(),
            BlockWeights::Nl(w) => w.named(),
        }
    }

    pub fn from_ordered(case: &BlockCase, tensors: Vec<Tensor<T>>) -> Result<Self> {
        Ok(match *case {
            BlockCase::Sr(cfg) => BlockWeights::Sr(SrWeights::from_ordered(&cfg, tensors)?),
            BlockCase::Se { reduction, .. } => BlockWeights::Se(SeWeights::from_ordered(reduction, tensors)?),
            BlockCase::Nl { .. } => BlockWeights::Nl(NlWeights::from_ordered(tensors)?),
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> BlockWeights<U> {
        match self {
            BlockWeights::Sr(w) => BlockWeights::Sr(w.cast()),
            BlockWeights::Se(w) => BlockWeights::Se(w.cast()),
            BlockWeights::Nl(w) => BlockWeights::Nl(w.cast()),
        }
    }
}

fn mismatch() -> Error {
    Error::Config("weights do not belong to this block".into())
}

pub fn forward<T: Scalar>(case: &BlockCase, x: &Tensor<T>, w: &BlockWeights<T>) -> Result<Tensor<T>> {
    match (case, w) {
        (BlockCase::Sr(cfg), BlockWeights::Sr(w)) => sr::sr_forward(x, w, cfg),
        (BlockCase::Se { .. }, BlockWeights::Se(w)) => baselines::se_forward(x, w),
        (BlockCase::Nl { .. }, BlockWeights::Nl(w)) => baselines::nonlocal_forward(x, w),
        _ => Err(mismatch()),
    }
}

/// Gradients of `⟨grad_y, forward(x)⟩`, ordered as `[x, weights in named() order]`.
pub fn backward<T: Scalar>(
    case: &BlockCase,
    x: &Tensor<T>,
    w: &BlockWeights<T>,
    grad_y: &Tensor<T>,
) -> Result<Vec<Tensor<T>>> {
    Ok(match (case, w) {
        (BlockCase::Sr(cfg), BlockWeights::Sr(w)) => {
            let g = sr::sr_backward(x, w, cfg, grad_y)?;
            std::iter::once(g.x)
                .chain(g.weights.named().into_iter().map(|(_, t)| t.clone()))
                .collect()
        }
        (BlockCase::Se { .. }, BlockWeights::Se(w)) => {
            let g = baselines::se_backward(x, w, grad_y)?;
            vec![g.x, g.w1, g.w2]
        }
        (BlockCase::Nl { .. }, BlockWeights::Nl(w)) => {
            let g = baselines::nonlocal_backward(x, w, grad_y)?;
            vec![g.x, g.w_theta, g.w_phi, g.w_g, g.w_out]
        }
        _ => return Err(mismatch()),
    })
}

/// Smallest distance of any ReLU input from the kink at zero, relative to
/// the largest ReLU input magnitude. Relative, because the sensitivity of
/// these inputs to a parameter nudge scales with their own magnitude (the
/// correlation variant is cubic in the pooled vector and its inputs are
/// tiny in absolute terms).
pub fn relu_margin(case: &BlockCase, x: &Tensor, w: &BlockWeights) -> Result<f64> {
    let margin = |ts: &[&Tensor]| {
        let abs = || ts.iter().flat_map(|t| t.data()).map(|v| v.abs());
        let (lo, hi) = (abs().fold(f64::INFINITY, f64::min), abs().fold(0.0, f64::max));
        if hi > 0.0 {
            lo / hi
        } else {
            0.0
        }
    };
    Ok(match (case, w) {
        (BlockCase::Sr(cfg), BlockWeights::Sr(w)) => margin(&sr::sr_trace(x, w, cfg)?.relu_inputs()),
        (BlockCase::Se { .. }, BlockWeights::Se(w)) => margin(&[&baselines::se_trace(x, w)?.hidden_pre]),
        (BlockCase::Nl { .. }, BlockWeights::Nl(_)) => f64::INFINITY,
        _ => return Err(mismatch()),
    })
}

/// Relative distance from the ReLU kink below which a random draw is
/// rejected by [`gradient_check`]. Central differences straddling a kink
/// measure the average of two slopes rather than the derivative.
pub const RELU_MARGIN: f64 = 1e-3;
const MAX_DRAWS: u64 = 64;

#[derive(Clone, Debug)]
pub struct BlockCheck {
    pub report: CheckReport,
    /// Seed of the accepted draw (differs from the requested one if a draw
    /// was rejected for sitting too close to a ReLU kink).
    pub seed: u64,
}

/// Finite-difference check of a whole block at `f64`.
///
/// Draws `x` uniform in `[-1, 1)`, dense random weights, and a fixed random
/// cotangent `r`; the loss is `Σ forward(x) ∘ r`. With `corrupt_gradient`
/// the analytic gradient of the last weight is deliberately falsified, which
/// must make the check fail.
pub fn gradient_check(
    case: &BlockCase,
    shape: &[usize],
    seed: u64,
    opts: CheckOptions,
    corrupt_gradient: bool,
) -> Result<BlockCheck> {
    if shape.len() != 4 || shape[1] != case.c_in() {
        return Err(Error::dim("gradient_check", shape, &[case.c_in()]));
    }
    for draw in 0..MAX_DRAWS {
        let draw_seed = seed.wrapping_add(draw.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut rng = ChaCha8Rng::seed_from_u64(draw_seed);
        let x = Tensor::uniform(shape, 1.0, &mut rng)?;
        let cotangent = Tensor::uniform(shape, 1.0, &mut rng)?;
        let weights = case.random_weights(draw_seed)?;
        if relu_margin(case, &x, &weights)? < RELU_MARGIN {
            continue;
        }
        let mut grads = backward(case, &x, &weights, &cotangent)?;
        if corrupt_gradient {
            let last = grads.last_mut().expect("every block has weights");
            let g = &mut last.data_mut()[0];
            *g = *g * 1.5 + 0.1;
        }
        let names = std::iter::once("x").chain(weights.named().into_iter().map(|(n, _)| n));
        let values = std::iter::once(&x).chain(weights.named().into_iter().map(|(_, t)| t));
        let params: Vec<Param> = names
            .zip(values)
            .zip(grads)
            .map(|((name, value), analytic)| Param {
                name: name.to_string(),
                value: value.clone(),
                analytic,
            })
            .collect();
        let loss = |vals: &[Tensor]| -> Result<f64> {
            let w = BlockWeights::from_ordered(case, vals[1..].to_vec())?;
            forward(case, &vals[0], &w)?.dot(&cotangent)
        };
        let report = gradcheck::finite_diff_check(loss, &params, opts)?;
        return Ok(BlockCheck {
            report,
            seed: draw_seed,
        });
    }
    Err(Error::Config(format!(
        "no draw within {MAX_DRAWS} attempts kept every ReLU input a relative {RELU_MARGIN} away from zero"
    )))
}
