use super::config::{SqueezeKind, SrConfig};
use super::nodes::NodeMatrix;
use super::reason::{self, ReasonTrace};
use super::reconstruct::{self, ReconstructTrace};
use super::weights::{ReasoningWeights, SrWeights};
use crate::error::{Result, StageExt};
use crate::ops;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Every intermediate of one SR forward pass.
#[derive(Clone, Debug)]
pub struct SrTrace<T: Scalar> {
    pub reduced_b: Tensor<T>,
    pub reduced_c: Option<Tensor<T>>,
    /// Squeezed vectors, `[N, c_reduced]`.
    pub pooled: Tensor<T>,
    pub nodes: Vec<NodeMatrix<T>>,
    pub reasoning: Vec<ReasonTrace<T>>,
    pub reasoned: Vec<NodeMatrix<T>>,
    pub reconstruction: ReconstructTrace<T>,
    pub output: Tensor<T>,
}

impl<T: Scalar> SrTrace<T> {
    /// The per-item channel gate, `[N, c_in]`.
    pub fn gate(&self) -> &Tensor<T> {
        &self.reconstruction.gate
    }

    /// Inputs of every ReLU in the block.
    pub fn relu_inputs(&self) -> Vec<&Tensor<T>> {
        self.reasoning.iter().map(ReasonTrace::pre_activation).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SrGrads<T: Scalar = f64> {
    pub x: Tensor<T>,
    pub weights: SrWeights<T>,
}

/// Runs the block and keeps every intermediate needed by [`sr_backward`].
pub fn sr_trace<T: Scalar>(
    x: &Tensor<T>,
    weights: &SrWeights<T>,
    cfg: &SrConfig,
) -> Result<SrTrace<T>> {
    weights.validate(cfg).stage("configuration")?;
    let (n, c_in, _, _) = x.nchw().stage("squeeze")?;
    if c_in != cfg.c_in {
        return Err(crate::Error::dim("sr_forward", x.shape(), &[cfg.c_in])).stage("squeeze");
    }
    let (m, k) = (cfg.m(), cfg.k);

    let (reduced_b, reduced_c, pooled) = (|| {
        let b = ops::conv1x1(x, &weights.reduce_b, None)?;
        match cfg.squeeze {
            SqueezeKind::Gap => {
                let pooled = ops::global_avg_pool(&b)?;
                Ok((b, None, pooled))
            }
            SqueezeKind::Ghp => {
                let w_c = weights.reduce_c.as_ref().expect("validated GHP weights");
                let c = ops::conv1x1(x, w_c, None)?;
                let pooled = ops::hadamard_pool(&b, &c)?;
                Ok((b, Some(c), pooled))
            }
        }
    })()
    .stage("squeeze")?;

    let c_red = cfg.c_reduced();
    let mut nodes = Vec::with_capacity(n);
    let mut traces = Vec::with_capacity(n);
    let mut reasoned = Vec::with_capacity(n);
    for item in 0..n {
        let g = NodeMatrix::from_vector(&pooled.data()[item * c_red..(item + 1) * c_red], m, k)
            .stage("reasoning")?;
        let (out, trace) = match &weights.reasoning {
            ReasoningWeights::Learned { w_g, a_g } => {
                let (out, t) = reason::learned_trace(&g, w_g, a_g).stage("reasoning")?;
                (out, ReasonTrace::Learned(t))
            }
            ReasoningWeights::Correlation {
                w_phi,
                w_theta,
                w_rho,
            } => {
                let (out, t) =
                    reason::correlation_trace(&g, w_phi, w_theta, w_rho).stage("reasoning")?;
                (out, ReasonTrace::Correlation(t))
            }
        };
        nodes.push(g);
        traces.push(trace);
        reasoned.push(out);
    }

    let (output, reconstruction) =
        reconstruct::reconstruct_trace(x, &reasoned, &weights.w_r, cfg.gate)
            .stage("reconstruction")?;

    Ok(SrTrace {
        reduced_b,
        reduced_c,
        pooled,
        nodes,
        reasoning: traces,
        reasoned,
        reconstruction,
        output,
    })
}

/// Squeeze → group into nodes → reason → reconstruct.
pub fn sr_forward<T: Scalar>(x: &Tensor<T>, weights: &SrWeights<T>, cfg: &SrConfig) -> Result<Tensor<T>> {
    sr_trace(x, weights, cfg).map(|t| t.output)
}

/// Gradients of `⟨grad_y, sr_forward(x)⟩` with respect to `x` and every weight.
pub fn sr_backward<T: Scalar>(
    x: &Tensor<T>,
    weights: &SrWeights<T>,
    cfg: &SrConfig,
    grad_y: &Tensor<T>,
) -> Result<SrGrads<T>> {
    let trace = sr_trace(x, weights, cfg)?;
    sr_backward_from_trace(x, weights, cfg, &trace, grad_y)
}

pub fn sr_backward_from_trace<T: Scalar>(
    x: &Tensor<T>,
    weights: &SrWeights<T>,
    cfg: &SrConfig,
    trace: &SrTrace<T>,
    grad_y: &Tensor<T>,
) -> Result<SrGrads<T>> {
    let (m, k) = (cfg.m(), cfg.k);
    if grad_y.shape() != x.shape() {
        return Err(crate::Error::dim("sr_backward", x.shape(), grad_y.shape())).stage("reconstruction");
    }
    let rec = reconstruct::reconstruct_backward(x, &trace.reconstruction, m, k, cfg.gate, grad_y)
        .stage("reconstruction")?;

    let n = trace.nodes.len();
    let c_red = cfg.c_reduced();
    let mut d_pooled = Vec::with_capacity(n * c_red);
    let mut d_reasoning: Option<ReasoningWeights<T>> = None;
    for item in 0..n {
        let g = &trace.nodes[item];
        let d_out = rec.g_out[item].values();
        let (d_g, d_w) = match (&weights.reasoning, &trace.reasoning[item]) {
            (ReasoningWeights::Learned { w_g, .. }, ReasonTrace::Learned(t)) => {
                let (d_g, d_wg, d_ag) =
                    reason::learned_backward(g, w_g, t, d_out).stage("reasoning")?;
                (d_g, ReasoningWeights::Learned { w_g: d_wg, a_g: d_ag })
            }
            (
                ReasoningWeights::Correlation {
                    w_phi,
                    w_theta,
                    w_rho,
                },
                ReasonTrace::Correlation(t),
            ) => {
                let gr = reason::correlation_backward(g, w_phi, w_theta, w_rho, t, d_out)
                    .stage("reasoning")?;
                (
                    gr.g,
                    ReasoningWeights::Correlation {
                        w_phi: gr.w_phi,
                        w_theta: gr.w_theta,
                        w_rho: gr.w_rho,
                    },
                )
            }
            _ => unreachable!("trace built from the same weights"),
        };
        d_pooled.extend(NodeMatrix::from_tensor(d_g).stage("reasoning")?.flatten());
        d_reasoning = Some(match d_reasoning {
            None => d_w,
            Some(acc) => add_reasoning(acc, d_w).stage("reasoning")?,
        });
    }
    let d_pooled = Tensor::new(trace.pooled.shape(), d_pooled).stage("squeeze")?;

    let (dx_squeeze, d_reduce_b, d_reduce_c) = (|| match cfg.squeeze {
        SqueezeKind::Gap => {
            let d_b = ops::global_avg_pool_backward(trace.reduced_b.shape(), &d_pooled)?;
            let gb = ops::conv1x1_backward(x, &weights.reduce_b, false, &d_b)?;
            Ok((gb.x, gb.w, None))
        }
        SqueezeKind::Ghp => {
            let c = trace.reduced_c.as_ref().expect("GHP trace keeps C");
            let w_c = weights.reduce_c.as_ref().expect("validated GHP weights");
            let (d_b, d_c) = ops::hadamard_pool_backward(&trace.reduced_b, c, &d_pooled)?;
            let gb = ops::conv1x1_backward(x, &weights.reduce_b, false, &d_b)?;
            let gc = ops::conv1x1_backward(x, w_c, false, &d_c)?;
            Ok((ops::add(&gb.x, &gc.x)?, gb.w, Some(gc.w)))
        }
    })()
    .stage("squeeze")?;

    Ok(SrGrads {
        x: ops::add(&rec.x, &dx_squeeze)?,
        weights: SrWeights {
            reduce_b: d_reduce_b,
            reduce_c: d_reduce_c,
            reasoning: d_reasoning.expect("batch has at least one item"),
            w_r: rec.w_r,
        },
    })
}

fn add_reasoning<T: Scalar>(a: ReasoningWeights<T>, b: ReasoningWeights<T>) -> Result<ReasoningWeights<T>> {
    use ReasoningWeights::*;
    Ok(match (a, b) {
        (Learned { w_g, a_g }, Learned { w_g: w2, a_g: a2 }) => Learned {
            w_g: ops::add(&w_g, &w2)?,
            a_g: ops::add(&a_g, &a2)?,
        },
        (
            Correlation {
                w_phi,
                w_theta,
                w_rho,
            },
            Correlation {
                w_phi: p2,
                w_theta: t2,
                w_rho: r2,
            },
        ) => Correlation {
            w_phi: ops::add(&w_phi, &p2)?,
            w_theta: ops::add(&w_theta, &t2)?,
            w_rho: ops::add(&w_rho, &r2)?,
        },
        _ => unreachable!("gradients of one block share a variant"),
    })
}
