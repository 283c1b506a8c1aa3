#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srblock::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(shape: &[usize], seed: u64) -> Tensor {
    Tensor::uniform(shape, 1.0, &mut rng(seed)).unwrap()
}

/// Small multiples of `1/denom`. Sums and products of such values stay exact
/// in f64, so results do not depend on summation order.
pub fn dyadic(shape: &[usize], seed: u64, denom: f64) -> Tensor {
    let mut r = rng(seed);
    Tensor::from_fn(shape, |_| r.gen_range(-4i32..=4) as f64 / denom).unwrap()
}

/// Random permutation of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng(seed));
    p
}

/// `out[.., p] = x[.., perm[p]]` over flattened spatial positions.
pub fn permute_positions(x: &Tensor, perm: &[usize]) -> Tensor {
    let (n, c, h, w) = x.nchw().unwrap();
    let hw = h * w;
    let src = x.data();
    Tensor::from_fn(x.shape(), |i| {
        let (plane, p) = (i / hw, i % hw);
        src[plane * hw + perm[p]]
    })
    .unwrap()
    .reshape(&[n, c, h, w])
    .unwrap()
}

/// Plain triple loop `a[m,k] · b[k,n]`.
pub fn naive_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (m, k, n) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; n]; m];
    for i in 0..m {
        for j in 0..n {
            for p in 0..k {
                out[i][j] += a[i][p] * b[p][j];
            }
        }
    }
    out
}

pub fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    let (r, c) = t.dims2().unwrap();
    (0..r).map(|i| t.data()[i * c..(i + 1) * c].to_vec()).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
