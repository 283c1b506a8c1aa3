//! Ops packaged together with their reverse-mode rule, so that generic
//! properties (zero-gradient linearity, finite-difference agreement) can be
//! exercised uniformly across the primitive set.

use crate::error::Result;
use crate::ops;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

type Backward<'a, T> = Box<dyn Fn(&Tensor<T>) -> Result<Vec<Tensor<T>>> + 'a>;

/// Output of an op plus the map from output gradient to the gradients of
/// every input, in argument order.
pub struct OpResult<'a, T: Scalar = f64> {
    pub output: Tensor<T>,
    backward: Backward<'a, T>,
}

impl<'a, T: Scalar> OpResult<'a, T> {
    pub fn new(
        output: Tensor<T>,
        backward: impl Fn(&Tensor<T>) -> Result<Vec<Tensor<T>>> + 'a,
    ) -> Self {
        OpResult {
            output,
            backward: Box::new(backward),
        }
    }

    pub fn backward(&self, grad: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        (self.backward)(grad)
    }
}

pub fn conv1x1<'a, T: Scalar>(
    x: &'a Tensor<T>,
    w: &'a Tensor<T>,
    bias: Option<&'a Tensor<T>>,
) -> Result<OpResult<'a, T>> {
    let out = ops::conv1x1(x, w, bias)?;
    Ok(OpResult::new(out, move |g| {
        let grads = ops::conv1x1_backward(x, w, bias.is_some(), g)?;
        Ok([Some(grads.x), Some(grads.w), grads.b].into_iter().flatten().collect())
    }))
}

pub fn matmul<'a, T: Scalar>(a: &'a Tensor<T>, b: &'a Tensor<T>) -> Result<OpResult<'a, T>> {
    let out = ops::matmul(a, b)?;
    Ok(OpResult::new(out, move |g| {
        let (da, db) = ops::matmul_backward(a, b, g)?;
        Ok(vec![da, db])
    }))
}

pub fn softmax<T: Scalar>(x: &Tensor<T>, axis: usize) -> Result<OpResult<'static, T>> {
    let out = ops::softmax(x, axis)?;
    let y = out.clone();
    Ok(OpResult::new(out, move |g| {
        Ok(vec![ops::softmax_backward(&y, g, axis)?])
    }))
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> OpResult<'_, T> {
    OpResult::new(ops::relu(x), move |g| Ok(vec![ops::relu_backward(x, g)?]))
}

pub fn sigmoid<T: Scalar>(x: &Tensor<T>) -> OpResult<'static, T> {
    let out = ops::sigmoid(x);
    let y = out.clone();
    OpResult::new(out, move |g| Ok(vec![ops::sigmoid_backward(&y, g)?]))
}

pub fn add<'a, T: Scalar>(x: &'a Tensor<T>, y: &'a Tensor<T>) -> Result<OpResult<'a, T>> {
    Ok(OpResult::new(ops::add(x, y)?, |g| Ok(vec![g.clone(), g.clone()])))
}

pub fn mul_elementwise<'a, T: Scalar>(
    x: &'a Tensor<T>,
    y: &'a Tensor<T>,
) -> Result<OpResult<'a, T>> {
    Ok(OpResult::new(ops::mul_elementwise(x, y)?, move |g| {
        let (dx, dy) = ops::mul_elementwise_backward(x, y, g)?;
        Ok(vec![dx, dy])
    }))
}

pub fn scale_channels<'a, T: Scalar>(
    x: &'a Tensor<T>,
    v: &'a Tensor<T>,
) -> Result<OpResult<'a, T>> {
    Ok(OpResult::new(ops::scale_channels(x, v)?, move |g| {
        let (dx, dv) = ops::scale_channels_backward(x, v, g)?;
        Ok(vec![dx, dv])
    }))
}

pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Result<OpResult<'_, T>> {
    Ok(OpResult::new(ops::global_avg_pool(x)?, move |g| {
        Ok(vec![ops::global_avg_pool_backward(x.shape(), g)?])
    }))
}

pub fn hadamard_pool<'a, T: Scalar>(b: &'a Tensor<T>, c: &'a Tensor<T>) -> Result<OpResult<'a, T>> {
    Ok(OpResult::new(ops::hadamard_pool(b, c)?, move |g| {
        let (db, dc) = ops::hadamard_pool_backward(b, c, g)?;
        Ok(vec![db, dc])
    }))
}
