use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ops;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const DEFAULT_SE_REDUCTION: usize = 16;

/// Squeeze-and-excitation weights: `w1: [c/r, c]`, `w2: [c, c/r]`, bias-free.
#[derive(Clone, Debug, PartialEq)]
pub struct SeWeights<T: Scalar = f64> {
    pub w1: Tensor<T>,
    pub w2: Tensor<T>,
    pub reduction: usize,
}

impl<T: Scalar> SeWeights<T> {
    pub fn init(c_in: usize, reduction: usize, seed: u64) -> Result<Self> {
        if reduction == 0 || c_in % reduction != 0 {
            return Err(Error::Config(format!(
                "SE reduction {reduction} must divide c_in {c_in}"
            )));
        }
        let hidden = c_in / reduction;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(SeWeights {
            w1: Tensor::uniform(&[hidden, c_in], 1.0 / (c_in as f64).sqrt(), &mut rng)?,
            w2: Tensor::uniform(&[c_in, hidden], 1.0 / (hidden as f64).sqrt(), &mut rng)?,
            reduction,
        })
    }

    pub fn c_in(&self) -> usize {
        self.w2.shape()[0]
    }

    pub fn validate(&self) -> Result<()> {
        let (hidden, c_in) = self.w1.dims2()?;
        if self.reduction == 0 || c_in % self.reduction != 0 || hidden != c_in / self.reduction {
            return Err(Error::Config(format!(
                "w1 shape {:?} inconsistent with reduction {}",
                self.w1.shape(),
                self.reduction
            )));
        }
        if self.w2.shape() != [c_in, hidden] {
            return Err(Error::dim("se weights", self.w1.shape(), self.w2.shape()));
        }
        Ok(())
    }

    pub fn named(&self) -> Vec<(&'static str, &Tensor<T>)> {
        vec![("w1", &self.w1), ("w2", &self.w2)]
    }

    pub fn from_ordered(reduction: usize, tensors: Vec<Tensor<T>>) -> Result<Self> {
        let [w1, w2]: [Tensor<T>; 2] = tensors
            .try_into()
            .map_err(|v: Vec<_>| Error::Config(format!("SE expects 2 weights, got {}", v.len())))?;
        let w = SeWeights { w1, w2, reduction };
        w.validate()?;
        Ok(w)
    }

    pub fn cast<U: Scalar>(&self) -> SeWeights<U> {
        SeWeights {
            w1: self.w1.cast(),
            w2: self.w2.cast(),
            reduction: self.reduction,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SeTrace<T: Scalar> {
    pub pooled: Tensor<T>,
    pub w1_t: Tensor<T>,
    pub hidden_pre: Tensor<T>,
    pub hidden: Tensor<T>,
    pub w2_t: Tensor<T>,
    /// `[N, C]`, each entry in `(0, 1)`.
    pub gate: Tensor<T>,
    pub output: Tensor<T>,
}

pub fn se_trace<T: Scalar>(x: &Tensor<T>, w: &SeWeights<T>) -> Result<SeTrace<T>> {
    w.validate()?;
    let (_, c, _, _) = x.nchw()?;
    if c != w.c_in() {
        return Err(Error::dim("se_forward", x.shape(), w.w1.shape()));
    }
    let pooled = ops::global_avg_pool(x)?;
    let w1_t = ops::transpose(&w.w1)?;
    let hidden_pre = ops::matmul(&pooled, &w1_t)?;
    let hidden = ops::relu(&hidden_pre);
    let w2_t = ops::transpose(&w.w2)?;
    let gate = ops::sigmoid(&ops::matmul(&hidden, &w2_t)?);
    let output = ops::scale_channels(x, &gate)?;
    Ok(SeTrace {
        pooled,
        w1_t,
        hidden_pre,
        hidden,
        w2_t,
        gate,
        output,
    })
}

/// `Y = x · sigmoid(w2 · relu(w1 · gap(x)))`, gate broadcast over positions.
pub fn se_forward<T: Scalar>(x: &Tensor<T>, w: &SeWeights<T>) -> Result<Tensor<T>> {
    se_trace(x, w).map(|t| t.output)
}

#[derive(Clone, Debug)]
pub struct SeGrads<T: Scalar = f64> {
    pub x: Tensor<T>,
    pub w1: Tensor<T>,
    pub w2: Tensor<T>,
}

pub fn se_backward<T: Scalar>(x: &Tensor<T>, w: &SeWeights<T>, grad_y: &Tensor<T>) -> Result<SeGrads<T>> {
    let t = se_trace(x, w)?;
    let (dx_scale, d_gate) = ops::scale_channels_backward(x, &t.gate, grad_y)?;
    let d_logits = ops::sigmoid_backward(&t.gate, &d_gate)?;
    let (d_hidden, d_w2_t) = ops::matmul_backward(&t.hidden, &t.w2_t, &d_logits)?;
    let d_hidden_pre = ops::relu_backward(&t.hidden_pre, &d_hidden)?;
    let (d_pooled, d_w1_t) = ops::matmul_backward(&t.pooled, &t.w1_t, &d_hidden_pre)?;
    let dx_pool = ops::global_avg_pool_backward(x.shape(), &d_pooled)?;
    Ok(SeGrads {
        x: ops::add(&dx_scale, &dx_pool)?,
        w1: ops::transpose(&d_w1_t)?,
        w2: ops::transpose(&d_w2_t)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Tensor {
        Tensor::from_fn(&[2, 8, 3, 2], |i| ((i * 7) % 11) as f64 / 5.0 - 1.0).unwrap()
    }

    #[test]
    fn zero_excitation_halves_input() {
        let mut w = SeWeights::<f64>::init(8, 4, 1).unwrap();
        w.w2 = Tensor::zeros(&[8, 2]).unwrap();
        let x = x();
        assert_eq!(se_forward(&x, &w).unwrap(), x.map(|v| 0.5 * v));
    }

    #[test]
    fn gate_is_shared_for_identical_items() {
        let w = SeWeights::<f64>::init(8, 4, 2).unwrap();
        let x = Tensor::full(&[3, 8, 2, 2], 0.75).unwrap();
        let t = se_trace(&x, &w).unwrap();
        let g = t.gate.data();
        assert_eq!(&g[0..8], &g[8..16]);
        assert_eq!(&g[0..8], &g[16..24]);
    }

    #[test]
    fn gate_is_strictly_inside_unit_interval() {
        let w = SeWeights::<f64>::init(8, 2, 3).unwrap();
        let t = se_trace(&x(), &w).unwrap();
        assert!(t.gate.data().iter().all(|&g| g > 0.0 && g < 1.0));
    }

    #[test]
    fn rejects_bad_reduction_and_channels() {
        assert!(SeWeights::<f64>::init(8, 3, 0).is_err());
        let w = SeWeights::<f64>::init(4, 2, 0).unwrap();
        assert!(se_forward(&x(), &w).is_err());
    }
}
