//! Primitive kernels. Each forward op has a matching `*_backward` that maps
//! the output gradient to input (and parameter) gradients; the blocks compose
//! these pairs by hand.

use crate::counter;
use crate::error::{Error, Result};
use crate::scalar::{gemm, max_of, Scalar, Strides};
use crate::tensor::{debug_check_finite, Tensor};

fn same_shape<T: Scalar>(op: &'static str, x: &Tensor<T>, y: &Tensor<T>) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::dim(op, x.shape(), y.shape()));
    }
    Ok(())
}

fn zip_map<T: Scalar>(
    op: &'static str,
    x: &Tensor<T>,
    y: &Tensor<T>,
    f: impl Fn(T, T) -> T,
) -> Result<Tensor<T>> {
    same_shape(op, x, y)?;
    let data = x.data().iter().zip(y.data()).map(|(&a, &b)| f(a, b)).collect();
    Tensor::new(x.shape(), data)
}

/// Pointwise channel mixing: `out[n,o,h,w] = Σ_c w[o,c]·x[n,c,h,w] + b[o]`.
pub fn conv1x1<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: Option<&Tensor<T>>,
) -> Result<Tensor<T>> {
    let (n, c, h, wd) = x.nchw()?;
    let (c_out, c_w) = w.dims2()?;
    if c_w != c {
        return Err(Error::dim("conv1x1", x.shape(), w.shape()));
    }
    if let Some(b) = bias {
        if b.shape() != [c_out] {
            return Err(Error::dim("conv1x1 bias", w.shape(), b.shape()));
        }
    }
    let hw = h * wd;
    let mut out = vec![T::zero(); n * c_out * hw];
    for item in 0..n {
        gemm(
            c_out,
            c,
            hw,
            w.data(),
            Strides::row_major(c),
            &x.data()[item * c * hw..(item + 1) * c * hw],
            Strides::row_major(hw),
            &mut out[item * c_out * hw..(item + 1) * c_out * hw],
            Strides::row_major(hw),
            false,
        );
    }
    if let Some(b) = bias {
        counter::record_elementwise(out.len());
        if hw > 0 {
            for (plane, chunk) in out.chunks_exact_mut(hw).enumerate() {
                let bias = b.data()[plane % c_out];
                chunk.iter_mut().for_each(|v| *v = *v + bias);
            }
        }
    }
    let out = Tensor::new(&[n, c_out, h, wd], out)?;
    debug_check_finite(&out, "conv1x1")?;
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct Conv1x1Grads<T: Scalar> {
    pub x: Tensor<T>,
    pub w: Tensor<T>,
    pub b: Option<Tensor<T>>,
}

pub fn conv1x1_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    with_bias: bool,
    grad: &Tensor<T>,
) -> Result<Conv1x1Grads<T>> {
    let (n, c, h, wd) = x.nchw()?;
    let (c_out, c_w) = w.dims2()?;
    if c_w != c || grad.shape() != [n, c_out, h, wd] {
        return Err(Error::dim("conv1x1_backward", x.shape(), grad.shape()));
    }
    let hw = h * wd;
    let mut dx = vec![T::zero(); n * c * hw];
    let mut dw = vec![T::zero(); c_out * c];
    for item in 0..n {
        let g = &grad.data()[item * c_out * hw..(item + 1) * c_out * hw];
        let xi = &x.data()[item * c * hw..(item + 1) * c * hw];
        gemm(
            c,
            c_out,
            hw,
            w.data(),
            Strides::transposed(c),
            g,
            Strides::row_major(hw),
            &mut dx[item * c * hw..(item + 1) * c * hw],
            Strides::row_major(hw),
            false,
        );
        gemm(
            c_out,
            hw,
            c,
            g,
            Strides::row_major(hw),
            xi,
            Strides::transposed(hw),
            &mut dw,
            Strides::row_major(c),
            true,
        );
    }
    let b = with_bias.then(|| {
        let mut db = vec![T::zero(); c_out];
        if hw > 0 {
            for (plane, g) in grad.data().chunks_exact(hw).enumerate() {
                let slot = plane % c_out;
                db[slot] = g.iter().fold(db[slot], |acc, &v| acc + v);
            }
        }
        db
    });
    Ok(Conv1x1Grads {
        x: Tensor::new(x.shape(), dx)?,
        w: Tensor::new(w.shape(), dw)?,
        b: b.map(|db| Tensor::new(&[c_out], db)).transpose()?,
    })
}

pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (p, q) = a.dims2()?;
    let (q2, r) = b.dims2()?;
    if q != q2 {
        return Err(Error::dim("matmul", a.shape(), b.shape()));
    }
    let mut out = vec![T::zero(); p * r];
    gemm(
        p,
        q,
        r,
        a.data(),
        Strides::row_major(q),
        b.data(),
        Strides::row_major(r),
        &mut out,
        Strides::row_major(r),
        false,
    );
    let out = Tensor::new(&[p, r], out)?;
    debug_check_finite(&out, "matmul")?;
    Ok(out)
}

/// Returns `(dA, dB) = (dOut·Bᵀ, Aᵀ·dOut)`.
pub fn matmul_backward<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    grad: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (p, q) = a.dims2()?;
    let (q2, r) = b.dims2()?;
    if q != q2 || grad.shape() != [p, r] {
        return Err(Error::dim("matmul_backward", a.shape(), grad.shape()));
    }
    let mut da = vec![T::zero(); p * q];
    gemm(
        p,
        r,
        q,
        grad.data(),
        Strides::row_major(r),
        b.data(),
        Strides::transposed(r),
        &mut da,
        Strides::row_major(q),
        false,
    );
    let mut db = vec![T::zero(); q * r];
    gemm(
        q,
        p,
        r,
        a.data(),
        Strides::transposed(q),
        grad.data(),
        Strides::row_major(r),
        &mut db,
        Strides::row_major(r),
        false,
    );
    Ok((Tensor::new(&[p, q], da)?, Tensor::new(&[q, r], db)?))
}

/// Matrix transpose. Pure data movement, no recorded work.
pub fn transpose<T: Scalar>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let (p, q) = a.dims2()?;
    Tensor::from_fn(&[q, p], |i| a.data()[(i % p) * q + i / p])
}

fn axis_layout(shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(Error::Shape {
            shape: shape.to_vec(),
            reason: format!("axis {axis} out of range"),
        });
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Ok((outer, shape[axis], inner))
}

/// Softmax of one contiguous slice in place, stabilised by subtracting the
/// slice maximum. Does not record work.
pub(crate) fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let total = exp_unnormalised(row);
    let inv = total.recip();
    row.iter_mut().for_each(|v| *v = *v * inv);
}

/// `row ← exp(row − max(row))`; returns the sum, i.e. the softmax
/// denominator.
pub(crate) fn exp_unnormalised<T: Scalar>(row: &mut [T]) -> T {
    T::exp_shifted(row, max_of(row))
}

/// Softmax along `axis`, stabilised by subtracting each slice's maximum.
pub fn softmax<T: Scalar>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    let (outer, len, inner) = axis_layout(x.shape(), axis)?;
    counter::record_elementwise(x.len());
    let mut out = x.data().to_vec();
    if inner == 1 {
        out.chunks_exact_mut(len).for_each(softmax_in_place);
    } else {
        let mut slice = vec![T::zero(); len];
        for o in 0..outer {
            for i in 0..inner {
                let at = |k: usize| o * len * inner + k * inner + i;
                for (k, s) in slice.iter_mut().enumerate() {
                    *s = out[at(k)];
                }
                softmax_in_place(&mut slice);
                for (k, s) in slice.iter().enumerate() {
                    out[at(k)] = *s;
                }
            }
        }
    }
    let out = Tensor::new(x.shape(), out)?;
    debug_check_finite(&out, "softmax")?;
    Ok(out)
}

/// Jacobian-vector product of softmax given its output `y`:
/// `dx = y ∘ (g − Σ_axis g∘y)`.
pub fn softmax_backward<T: Scalar>(y: &Tensor<T>, grad: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    same_shape("softmax_backward", y, grad)?;
    let (outer, len, inner) = axis_layout(y.shape(), axis)?;
    let (yd, gd) = (y.data(), grad.data());
    let mut dx = vec![T::zero(); y.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |k: usize| o * len * inner + k * inner + i;
            let dot = (0..len).fold(T::zero(), |acc, k| acc + yd[at(k)] * gd[at(k)]);
            for k in 0..len {
                dx[at(k)] = yd[at(k)] * (gd[at(k)] - dot);
            }
        }
    }
    Tensor::new(y.shape(), dx)
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    counter::record_elementwise(x.len());
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn relu_backward<T: Scalar>(x: &Tensor<T>, grad: &Tensor<T>) -> Result<Tensor<T>> {
    zip_map("relu_backward", x, grad, |v, g| if v > T::zero() { g } else { T::zero() })
}

pub fn sigmoid<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    counter::record_elementwise(x.len());
    x.map(|v| T::one() / (T::one() + (-v).exp()))
}

/// Takes the sigmoid output `y`, not its input.
pub fn sigmoid_backward<T: Scalar>(y: &Tensor<T>, grad: &Tensor<T>) -> Result<Tensor<T>> {
    zip_map("sigmoid_backward", y, grad, |s, g| g * s * (T::one() - s))
}

pub fn add<T: Scalar>(x: &Tensor<T>, y: &Tensor<T>) -> Result<Tensor<T>> {
    let out = zip_map("add", x, y, |a, b| a + b)?;
    counter::record_elementwise(out.len());
    debug_check_finite(&out, "add")?;
    Ok(out)
}

pub fn sub<T: Scalar>(x: &Tensor<T>, y: &Tensor<T>) -> Result<Tensor<T>> {
    let out = zip_map("sub", x, y, |a, b| a - b)?;
    counter::record_elementwise(out.len());
    debug_check_finite(&out, "sub")?;
    Ok(out)
}

pub fn mul_elementwise<T: Scalar>(x: &Tensor<T>, y: &Tensor<T>) -> Result<Tensor<T>> {
    let out = zip_map("mul_elementwise", x, y, |a, b| a * b)?;
    counter::record_elementwise(out.len());
    debug_check_finite(&out, "mul_elementwise")?;
    Ok(out)
}

pub fn mul_elementwise_backward<T: Scalar>(
    x: &Tensor<T>,
    y: &Tensor<T>,
    grad: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    same_shape("mul_elementwise_backward", x, grad)?;
    Ok((
        zip_map("mul_elementwise_backward", grad, y, |g, b| g * b)?,
        zip_map("mul_elementwise_backward", grad, x, |g, a| g * a)?,
    ))
}

/// Resolves the per-(item, channel) gate index for a `[C]` or `[N, C]` gate.
fn gate_layout<T: Scalar>(x: &Tensor<T>, v: &Tensor<T>) -> Result<bool> {
    let (n, c, _, _) = x.nchw()?;
    match v.shape() {
        [vc] if *vc == c => Ok(false),
        [vn, vc] if *vn == n && *vc == c => Ok(true),
        _ => Err(Error::dim("scale_channels", x.shape(), v.shape())),
    }
}

/// Multiplies every channel of `x` by the matching gate entry. `v` is either
/// shared across the batch (`[C]`) or per item (`[N, C]`).
pub fn scale_channels<T: Scalar>(x: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
    let per_item = gate_layout(x, v)?;
    let (_, c, h, w) = x.nchw()?;
    let hw = h * w;
    counter::record_elementwise(x.len());
    let nc = if per_item { usize::MAX } else { c };
    let out = Tensor::new(x.shape(), scaled_planes(x.data(), v.data(), hw, nc))?;
    debug_check_finite(&out, "scale_channels")?;
    Ok(out)
}

/// Multiplies plane `p` (of `hw` elements) by `v[p % nc]`.
fn scaled_planes<T: Scalar>(x: &[T], v: &[T], hw: usize, nc: usize) -> Vec<T> {
    let mut out = x.to_vec();
    if hw > 0 {
        for (plane, chunk) in out.chunks_exact_mut(hw).enumerate() {
            let s = v[plane % nc];
            chunk.iter_mut().for_each(|e| *e = *e * s);
        }
    }
    out
}

/// Returns `(dx, dv)`; `dv` has the shape of `v`.
pub fn scale_channels_backward<T: Scalar>(
    x: &Tensor<T>,
    v: &Tensor<T>,
    grad: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let per_item = gate_layout(x, v)?;
    same_shape("scale_channels_backward", x, grad)?;
    let (_, c, h, w) = x.nchw()?;
    let hw = h * w;
    let nc = if per_item { usize::MAX } else { c };
    let dx = Tensor::new(x.shape(), scaled_planes(grad.data(), v.data(), hw, nc))?;
    let mut dv = vec![T::zero(); v.len()];
    if hw > 0 {
        for (plane, (g, xv)) in grad.data().chunks_exact(hw).zip(x.data().chunks_exact(hw)).enumerate() {
            let slot = plane % nc;
            dv[slot] = g.iter().zip(xv).fold(dv[slot], |acc, (&a, &b)| acc + a * b);
        }
    }
    Ok((dx, Tensor::new(v.shape(), dv)?))
}

/// `out[n,c] = mean over (h,w) of x[n,c,h,w]`.
pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.nchw()?;
    let hw = h * w;
    counter::record_elementwise(x.len());
    let scale = T::from_usize(hw).expect("spatial size fits the scalar type");
    let out = Tensor::from_fn(&[n, c], |i| {
        x.data()[i * hw..(i + 1) * hw]
            .iter()
            .fold(T::zero(), |acc, &v| acc + v)
            / scale
    })?;
    debug_check_finite(&out, "global_avg_pool")?;
    Ok(out)
}

/// Spreads `grad[n,c]` uniformly over the `h·w` positions of `input_shape`.
pub fn global_avg_pool_backward<T: Scalar>(input_shape: &[usize], grad: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = match *input_shape {
        [n, c, h, w] => (n, c, h, w),
        _ => return Err(Error::dim("global_avg_pool_backward", input_shape, grad.shape())),
    };
    if grad.shape() != [n, c] {
        return Err(Error::dim("global_avg_pool_backward", input_shape, grad.shape()));
    }
    let hw = h * w;
    let scale = T::from_usize(hw).expect("spatial size fits the scalar type");
    Tensor::from_fn(input_shape, |i| grad.data()[i / hw] / scale)
}

/// Sum over spatial positions of the channelwise product of two maps:
/// `out[n,c] = Σ_{h,w} b[n,c,h,w]·c[n,c,h,w]`. Records one multiply-accumulate
/// per input position.
pub fn hadamard_pool<T: Scalar>(b: &Tensor<T>, c: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape("hadamard_pool", b, c)?;
    let (n, ch, h, w) = b.nchw()?;
    let hw = h * w;
    counter::record_macs(b.len());
    let out = Tensor::from_fn(&[n, ch], |i| {
        let range = i * hw..(i + 1) * hw;
        b.data()[range.clone()]
            .iter()
            .zip(&c.data()[range])
            .fold(T::zero(), |acc, (&p, &q)| acc + p * q)
    })?;
    debug_check_finite(&out, "hadamard_pool")?;
    Ok(out)
}

/// Returns `(db, dc)`.
pub fn hadamard_pool_backward<T: Scalar>(
    b: &Tensor<T>,
    c: &Tensor<T>,
    grad: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    same_shape("hadamard_pool_backward", b, c)?;
    let (n, ch, h, w) = b.nchw()?;
    if grad.shape() != [n, ch] {
        return Err(Error::dim("hadamard_pool_backward", b.shape(), grad.shape()));
    }
    let hw = h * w;
    let db = Tensor::from_fn(b.shape(), |i| grad.data()[i / hw] * c.data()[i])?;
    let dc = Tensor::from_fn(b.shape(), |i| grad.data()[i / hw] * b.data()[i])?;
    Ok((db, dc))
}
