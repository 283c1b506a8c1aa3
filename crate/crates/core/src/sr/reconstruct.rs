use super::config::GateActivation;
use super::nodes::NodeMatrix;
use crate::error::{Error, Result};
use crate::ops;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Intermediates of the reconstruction stage.
#[derive(Clone, Debug)]
pub struct ReconstructTrace<T: Scalar> {
    /// `[N, c_reduced]` reasoned vectors.
    pub flat: Tensor<T>,
    /// `w_rᵀ`, `[c_reduced, c_in]`.
    pub w_r_t: Tensor<T>,
    /// Gate before the optional activation, `[N, c_in]`.
    pub logits: Tensor<T>,
    /// Gate applied to the channels, `[N, c_in]`.
    pub gate: Tensor<T>,
}

pub(crate) fn reconstruct_trace<T: Scalar>(
    x: &Tensor<T>,
    g_out: &[NodeMatrix<T>],
    w_r: &Tensor<T>,
    activation: GateActivation,
) -> Result<(Tensor<T>, ReconstructTrace<T>)> {
    let (n, c_in, _, _) = x.nchw()?;
    if g_out.len() != n {
        return Err(Error::dim("reconstruct", x.shape(), &[g_out.len()]));
    }
    let (c_w, c_red) = w_r.dims2()?;
    if c_w != c_in {
        return Err(Error::dim("reconstruct", x.shape(), w_r.shape()));
    }
    let mut flat = Vec::with_capacity(n * c_red);
    for g in g_out {
        let v = g.flatten();
        if v.len() != c_red {
            return Err(Error::dim("reconstruct", &[v.len()], w_r.shape()));
        }
        flat.extend(v);
    }
    let flat = Tensor::new(&[n, c_red], flat)?;
    let w_r_t = ops::transpose(w_r)?;
    let logits = ops::matmul(&flat, &w_r_t)?;
    let gate = match activation {
        GateActivation::None => logits.clone(),
        GateActivation::Sigmoid => ops::sigmoid(&logits),
    };
    let y = ops::add(&ops::scale_channels(x, &gate)?, x)?;
    Ok((
        y,
        ReconstructTrace {
            flat,
            w_r_t,
            logits,
            gate,
        },
    ))
}

/// `Y = x · (w_r · flatten(g_out)) + x`, with the gate broadcast over
/// positions and one node matrix per batch item.
pub fn reconstruct<T: Scalar>(
    x: &Tensor<T>,
    g_out: &[NodeMatrix<T>],
    w_r: &Tensor<T>,
    activation: GateActivation,
) -> Result<Tensor<T>> {
    reconstruct_trace(x, g_out, w_r, activation).map(|(y, _)| y)
}

pub(crate) struct ReconstructGrads<T: Scalar> {
    pub x: Tensor<T>,
    /// One gradient per batch item, in node-matrix layout.
    pub g_out: Vec<NodeMatrix<T>>,
    pub w_r: Tensor<T>,
}

pub(crate) fn reconstruct_backward<T: Scalar>(
    x: &Tensor<T>,
    trace: &ReconstructTrace<T>,
    m: usize,
    k: usize,
    activation: GateActivation,
    grad: &Tensor<T>,
) -> Result<ReconstructGrads<T>> {
    let (d_scaled_x, d_gate) = ops::scale_channels_backward(x, &trace.gate, grad)?;
    let dx = ops::add(&d_scaled_x, grad)?;
    let d_logits = match activation {
        GateActivation::None => d_gate,
        GateActivation::Sigmoid => ops::sigmoid_backward(&trace.gate, &d_gate)?,
    };
    let (d_flat, d_w_r_t) = ops::matmul_backward(&trace.flat, &trace.w_r_t, &d_logits)?;
    let (n, c_red) = d_flat.dims2()?;
    let g_out = (0..n)
        .map(|i| NodeMatrix::from_vector(&d_flat.data()[i * c_red..(i + 1) * c_red], m, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReconstructGrads {
        x: dx,
        g_out,
        w_r: ops::transpose(&d_w_r_t)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Tensor {
        Tensor::from_fn(&[2, 4, 2, 3], |i| (i as f64 * 0.37).cos()).unwrap()
    }

    fn nodes(n: usize) -> Vec<NodeMatrix> {
        (0..n)
            .map(|i| NodeMatrix::from_vector(&[1.0, 2.0, -1.0, 0.5].map(|v| v + i as f64), 2, 2).unwrap())
            .collect()
    }

    #[test]
    fn zero_projection_is_pure_residual() {
        let x = x();
        let y = reconstruct(&x, &nodes(2), &Tensor::zeros(&[4, 4]).unwrap(), GateActivation::None)
            .unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn unit_gate_doubles_input() {
        let x = x();
        // each gate entry sums the reasoned vector, made to equal one
        let g: Vec<_> = (0..2)
            .map(|_| NodeMatrix::from_vector(&[0.25; 4], 2, 2).unwrap())
            .collect();
        let y = reconstruct(&x, &g, &Tensor::ones(&[4, 4]).unwrap(), GateActivation::None).unwrap();
        assert_eq!(y, x.map(|v| 2.0 * v));
    }

    #[test]
    fn mismatched_projection_is_rejected() {
        assert!(reconstruct(&x(), &nodes(2), &Tensor::zeros(&[4, 3]).unwrap(), GateActivation::None).is_err());
        assert!(reconstruct(&x(), &nodes(1), &Tensor::zeros(&[4, 4]).unwrap(), GateActivation::None).is_err());
    }
}
