use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::counter;

/// Floating-point element type of a [`Tensor`](crate::Tensor).
///
/// `f64` is the default and the only precision used for gradient checks;
/// `f32` exists for latency benchmarks.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    const NAME: &'static str;

    /// # Safety
    /// All three operands must be valid for the given extents and strides.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 converts to every scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// `v ← exp(v − shift)` elementwise; returns the sum of the results.
    fn exp_shifted(values: &mut [Self], shift: Self) -> Self {
        exp_shifted_with(values, shift, |v| v.exp())
    }
}

/// Eight independent accumulators so the sum does not serialise the loop.
#[inline(always)]
fn exp_shifted_with<T: Float>(values: &mut [T], shift: T, exp: impl Fn(T) -> T) -> T {
    let mut lanes = [T::zero(); 8];
    let mut chunks = values.chunks_exact_mut(8);
    for c in &mut chunks {
        for (l, v) in lanes.iter_mut().zip(c.iter_mut()) {
            *v = exp(*v - shift);
            *l = *l + *v;
        }
    }
    let mut total = lanes.iter().fold(T::zero(), |a, &b| a + b);
    for v in chunks.into_remainder() {
        *v = exp(*v - shift);
        total = total + *v;
    }
    total
}

/// Largest element, NaN-oblivious, with eight independent lanes.
pub(crate) fn max_of<T: Float>(values: &[T]) -> T {
    let mut lanes = [T::neg_infinity(); 8];
    let mut chunks = values.chunks_exact(8);
    for c in &mut chunks {
        for (l, &v) in lanes.iter_mut().zip(c) {
            *l = if v > *l { v } else { *l };
        }
    }
    chunks
        .remainder()
        .iter()
        .chain(&lanes)
        .fold(T::neg_infinity(), |m, &v| if v > m { v } else { m })
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    fn exp_shifted(values: &mut [f32], shift: f32) -> f32 {
        exp_shifted_with(values, shift, exp_f32)
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// Row/column strides of a strided matrix view, in elements.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Strides {
    pub row: usize,
    pub col: usize,
}

impl Strides {
    /// Row-major storage with `cols` columns.
    pub fn row_major(cols: usize) -> Self {
        Strides { row: cols, col: 1 }
    }

    /// The transpose of a row-major matrix with `cols` columns.
    pub fn transposed(cols: usize) -> Self {
        Strides { row: 1, col: cols }
    }

    fn span(&self, rows: usize, cols: usize) -> usize {
        (rows - 1) * self.row + (cols - 1) * self.col + 1
    }
}

/// Products with at most this many multiply-accumulates skip the packed
/// kernel, whose setup cost dominates at that size.
const SMALL_GEMM: usize = 4096;

/// `c = a·b (+ c if accumulate)` for an `m×k` by `k×n` product over strided
/// views. Records `m·k·n` multiply-accumulates.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    sa: Strides,
    b: &[T],
    sb: Strides,
    c: &mut [T],
    sc: Strides,
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(sc.span(m, n) <= c.len(), "gemm output view out of bounds");
    let beta = if accumulate { T::one() } else { T::zero() };
    if k == 0 {
        if !accumulate {
            for i in 0..m {
                for j in 0..n {
                    c[i * sc.row + j * sc.col] = T::zero();
                }
            }
        }
        return;
    }
    assert!(sa.span(m, k) <= a.len(), "gemm lhs view out of bounds");
    assert!(sb.span(k, n) <= b.len(), "gemm rhs view out of bounds");
    counter::record_macs(m * k * n);
    if m * k * n <= SMALL_GEMM {
        for i in 0..m {
            for j in 0..n {
                let dot = (0..k).fold(T::zero(), |acc, p| acc + a[i * sa.row + p * sa.col] * b[p * sb.row + j * sb.col]);
                let out = &mut c[i * sc.row + j * sc.col];
                *out = if accumulate { *out + dot } else { dot };
            }
        }
        return;
    }
    // SAFETY: the three views were bounds-checked above and `c` is borrowed
    // mutably, so it cannot alias `a` or `b`.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            a.as_ptr(),
            sa.row as isize,
            sa.col as isize,
            b.as_ptr(),
            sb.row as isize,
            sb.col as isize,
            beta,
            c.as_mut_ptr(),
            sc.row as isize,
            sc.col as isize,
        );
    }
}

/// Branch-free `exp` for `f32` that the compiler can vectorise: split
/// `x = k·ln2 + r` with `|r| ≤ ln2/2`, evaluate a degree-6 Taylor polynomial
/// for `e^r` (truncation below 2e-7 relative) and scale by `2^k` through the
/// exponent bits. Inputs are clamped to the normal range, so results below
/// about 1e-38 are returned as that bound instead of subnormals or zero.
#[inline(always)]
fn exp_f32(x: f32) -> f32 {
    const LOG2E: f32 = std::f32::consts::LOG2_E;
    const LN2_HI: f32 = 0.693_145_75;
    const LN2_LO: f32 = 1.428_606_8e-6;
    // adding 1.5·2^23 rounds to the nearest integer in the low mantissa bits
    const ROUNDER: f32 = 12_582_912.0;
    let x = x.clamp(-87.0, 88.0);
    let t = x * LOG2E + ROUNDER;
    let k = t - ROUNDER;
    let ki = (t.to_bits() as i32).wrapping_sub(ROUNDER.to_bits() as i32);
    let r = x - k * LN2_HI - k * LN2_LO;
    let p = 1.0
        + r * (1.0 + r * (0.5 + r * (1.0 / 6.0 + r * (1.0 / 24.0 + r * (1.0 / 120.0 + r * (1.0 / 720.0))))));
    p * f32::from_bits(((ki + 127) as u32) << 23)
}
