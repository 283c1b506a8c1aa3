//! Reasoning over the node graph. Both variants work on an `m × k` node
//! matrix whose columns are nodes.

use super::nodes::NodeMatrix;
use crate::error::{Error, Result};
use crate::ops;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Intermediates of `relu(W_g · G · (I − A_g))`.
#[derive(Clone, Debug)]
pub struct LearnedTrace<T: Scalar> {
    pub laplacian: Tensor<T>,
    pub transformed: Tensor<T>,
    pub pre_activation: Tensor<T>,
}

/// Intermediates of `relu(ρ(G) · [φ(G)ᵀ θ(G)])`.
#[derive(Clone, Debug)]
pub struct CorrelationTrace<T: Scalar> {
    pub query_t: Tensor<T>,
    pub key: Tensor<T>,
    pub adjacency: Tensor<T>,
    pub value: Tensor<T>,
    pub pre_activation: Tensor<T>,
}

#[derive(Clone, Debug)]
pub enum ReasonTrace<T: Scalar> {
    Learned(LearnedTrace<T>),
    Correlation(CorrelationTrace<T>),
}

impl<T: Scalar> ReasonTrace<T> {
    pub fn pre_activation(&self) -> &Tensor<T> {
        match self {
            ReasonTrace::Learned(t) => &t.pre_activation,
            ReasonTrace::Correlation(t) => &t.pre_activation,
        }
    }
}

fn check_square<T: Scalar>(op: &'static str, w: &Tensor<T>, n: usize) -> Result<()> {
    if w.shape() != [n, n] {
        return Err(Error::dim(op, w.shape(), &[n, n]));
    }
    Ok(())
}

pub(crate) fn learned_trace<T: Scalar>(
    g: &NodeMatrix<T>,
    w_g: &Tensor<T>,
    a_g: &Tensor<T>,
) -> Result<(NodeMatrix<T>, LearnedTrace<T>)> {
    let (m, k) = g.dims();
    check_square("reason_learned w_g", w_g, m)?;
    check_square("reason_learned a_g", a_g, k)?;
    let laplacian = ops::sub(&Tensor::eye(k)?, a_g)?;
    let transformed = ops::matmul(w_g, g.values())?;
    let pre_activation = ops::matmul(&transformed, &laplacian)?;
    let out = NodeMatrix::from_tensor(ops::relu(&pre_activation))?;
    Ok((
        out,
        LearnedTrace {
            laplacian,
            transformed,
            pre_activation,
        },
    ))
}

/// `G_out = relu(W_g · G_in · (I − A_g))`.
pub fn reason_learned<T: Scalar>(
    g: &NodeMatrix<T>,
    w_g: &Tensor<T>,
    a_g: &Tensor<T>,
) -> Result<NodeMatrix<T>> {
    learned_trace(g, w_g, a_g).map(|(out, _)| out)
}

/// Returns `(dG, dW_g, dA_g)`.
pub(crate) fn learned_backward<T: Scalar>(
    g: &NodeMatrix<T>,
    w_g: &Tensor<T>,
    trace: &LearnedTrace<T>,
    grad: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let d_pre = ops::relu_backward(&trace.pre_activation, grad)?;
    let (d_transformed, d_laplacian) =
        ops::matmul_backward(&trace.transformed, &trace.laplacian, &d_pre)?;
    let (d_wg, d_g) = ops::matmul_backward(w_g, g.values(), &d_transformed)?;
    Ok((d_g, d_wg, d_laplacian.map(|v| -v)))
}

pub(crate) fn correlation_trace<T: Scalar>(
    g: &NodeMatrix<T>,
    w_phi: &Tensor<T>,
    w_theta: &Tensor<T>,
    w_rho: &Tensor<T>,
) -> Result<(NodeMatrix<T>, CorrelationTrace<T>)> {
    let (m, _) = g.dims();
    check_square("reason_correlation w_phi", w_phi, m)?;
    check_square("reason_correlation w_theta", w_theta, m)?;
    check_square("reason_correlation w_rho", w_rho, m)?;
    let query_t = ops::transpose(&ops::matmul(w_phi, g.values())?)?;
    let key = ops::matmul(w_theta, g.values())?;
    let adjacency = ops::matmul(&query_t, &key)?;
    let value = ops::matmul(w_rho, g.values())?;
    let pre_activation = ops::matmul(&value, &adjacency)?;
    let out = NodeMatrix::from_tensor(ops::relu(&pre_activation))?;
    Ok((
        out,
        CorrelationTrace {
            query_t,
            key,
            adjacency,
            value,
            pre_activation,
        },
    ))
}

/// `G_out = relu(ρ(G) · [φ(G)ᵀ · θ(G)])` where each projection left-multiplies
/// the node matrix. The `k × k` adjacency is used unnormalised.
pub fn reason_correlation<T: Scalar>(
    g: &NodeMatrix<T>,
    w_phi: &Tensor<T>,
    w_theta: &Tensor<T>,
    w_rho: &Tensor<T>,
) -> Result<NodeMatrix<T>> {
    correlation_trace(g, w_phi, w_theta, w_rho).map(|(out, _)| out)
}

pub(crate) struct CorrelationGrads<T: Scalar> {
    pub g: Tensor<T>,
    pub w_phi: Tensor<T>,
    pub w_theta: Tensor<T>,
    pub w_rho: Tensor<T>,
}

pub(crate) fn correlation_backward<T: Scalar>(
    g: &NodeMatrix<T>,
    w_phi: &Tensor<T>,
    w_theta: &Tensor<T>,
    w_rho: &Tensor<T>,
    trace: &CorrelationTrace<T>,
    grad: &Tensor<T>,
) -> Result<CorrelationGrads<T>> {
    let d_pre = ops::relu_backward(&trace.pre_activation, grad)?;
    let (d_value, d_adj) = ops::matmul_backward(&trace.value, &trace.adjacency, &d_pre)?;
    let (d_query_t, d_key) = ops::matmul_backward(&trace.query_t, &trace.key, &d_adj)?;
    let d_query = ops::transpose(&d_query_t)?;
    let (d_wphi, dg_phi) = ops::matmul_backward(w_phi, g.values(), &d_query)?;
    let (d_wtheta, dg_theta) = ops::matmul_backward(w_theta, g.values(), &d_key)?;
    let (d_wrho, dg_rho) = ops::matmul_backward(w_rho, g.values(), &d_value)?;
    let d_g = ops::add(&ops::add(&dg_phi, &dg_theta)?, &dg_rho)?;
    Ok(CorrelationGrads {
        g: d_g,
        w_phi: d_wphi,
        w_theta: d_wtheta,
        w_rho: d_wrho,
    })
}
