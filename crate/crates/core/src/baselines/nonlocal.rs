use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::counter;
use crate::error::{Error, Result};
use crate::ops;
use crate::scalar::{gemm, Scalar, Strides};
use crate::tensor::Tensor;

/// Embedded-Gaussian non-local weights: three `[c', c_in]` projections and
/// the `[c_in, c']` output projection, with `c' = c_in / 2`. Bias-free.
#[derive(Clone, Debug, PartialEq)]
pub struct NlWeights<T: Scalar = f64> {
    pub w_theta: Tensor<T>,
    pub w_phi: Tensor<T>,
    pub w_g: Tensor<T>,
    pub w_out: Tensor<T>,
}

impl<T: Scalar> NlWeights<T> {
    pub fn init(c_in: usize, seed: u64) -> Result<Self> {
        if c_in < 2 || c_in % 2 != 0 {
            return Err(Error::Config(format!(
                "non-local block needs an even channel count, got {c_in}"
            )));
        }
        let inner = c_in / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let proj = 1.0 / (c_in as f64).sqrt();
        Ok(NlWeights {
            w_theta: Tensor::uniform(&[inner, c_in], proj, &mut rng)?,
            w_phi: Tensor::uniform(&[inner, c_in], proj, &mut rng)?,
            w_g: Tensor::uniform(&[inner, c_in], proj, &mut rng)?,
            w_out: Tensor::uniform(&[c_in, inner], 1.0 / (inner as f64).sqrt(), &mut rng)?,
        })
    }

    pub fn c_in(&self) -> usize {
        self.w_out.shape()[0]
    }

    pub fn inner(&self) -> usize {
        self.w_out.shape()[1]
    }

    pub fn validate(&self) -> Result<()> {
        let (c_in, inner) = self.w_out.dims2()?;
        for (name, w) in [("w_theta", &self.w_theta), ("w_phi", &self.w_phi), ("w_g", &self.w_g)] {
            if w.shape() != [inner, c_in] {
                return Err(Error::Config(format!(
                    "{name} has shape {:?}, expected {:?}",
                    w.shape(),
                    [inner, c_in]
                )));
            }
        }
        Ok(())
    }

    pub fn named(&self) -> Vec<(&'static str, &Tensor<T>)> {
        vec![
            ("w_theta", &self.w_theta),
            ("w_phi", &self.w_phi),
            ("w_g", &self.w_g),
            ("w_out", &self.w_out),
        ]
    }

    pub fn from_ordered(tensors: Vec<Tensor<T>>) -> Result<Self> {
        let [w_theta, w_phi, w_g, w_out]: [Tensor<T>; 4] = tensors
            .try_into()
            .map_err(|v: Vec<_>| Error::Config(format!("non-local expects 4 weights, got {}", v.len())))?;
        let w = NlWeights {
            w_theta,
            w_phi,
            w_g,
            w_out,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn cast<U: Scalar>(&self) -> NlWeights<U> {
        NlWeights {
            w_theta: self.w_theta.cast(),
            w_phi: self.w_phi.cast(),
            w_g: self.w_g.cast(),
            w_out: self.w_out.cast(),
        }
    }
}

fn check_input<T: Scalar>(x: &Tensor<T>, w: &NlWeights<T>) -> Result<()> {
    w.validate()?;
    let (_, c, _, _) = x.nchw()?;
    if c != w.c_in() {
        return Err(Error::dim("nonlocal_forward", x.shape(), w.w_theta.shape()));
    }
    Ok(())
}

/// Full non-local forward: `Y = x + w_out · (X_g · softmax(X_θᵀ X_φ)ᵀ)` per
/// item, with the `HW × HW` affinity materialised in one piece.
pub fn nonlocal_forward<T: Scalar>(x: &Tensor<T>, w: &NlWeights<T>) -> Result<Tensor<T>> {
    nonlocal_forward_tiled(x, w, usize::MAX)
}

/// Same result as [`nonlocal_forward`], but the affinity is built a block of
/// query rows at a time so that at most `max_tile_elems` affinity entries
/// (never fewer than one full row) exist at once.
pub fn nonlocal_forward_tiled<T: Scalar>(
    x: &Tensor<T>,
    w: &NlWeights<T>,
    max_tile_elems: usize,
) -> Result<Tensor<T>> {
    check_input(x, w)?;
    let (n_items, _, h, wd) = x.nchw()?;
    let positions = h * wd;
    let inner = w.inner();
    let theta = ops::conv1x1(x, &w.w_theta, None)?;
    let phi = ops::conv1x1(x, &w.w_phi, None)?;
    let g = ops::conv1x1(x, &w.w_g, None)?;

    let tile_rows = (max_tile_elems / positions).clamp(1, positions);
    let mut tile = vec![T::zero(); tile_rows * positions];
    let mut totals = vec![T::zero(); tile_rows];
    let mut aggregated = vec![T::zero(); n_items * inner * positions];
    let item_len = inner * positions;
    for item in 0..n_items {
        let span = item * item_len..(item + 1) * item_len;
        let (th, ph, gi) = (&theta.data()[span.clone()], &phi.data()[span.clone()], &g.data()[span.clone()]);
        let agg = &mut aggregated[span];
        for r0 in (0..positions).step_by(tile_rows) {
            let rows = tile_rows.min(positions - r0);
            let tile = &mut tile[..rows * positions];
            // affinity rows r0..r0+rows: θᵀ[rows] · φ
            gemm(
                rows,
                inner,
                positions,
                &th[r0..],
                Strides::transposed(positions),
                ph,
                Strides::row_major(positions),
                tile,
                Strides::row_major(positions),
                false,
            );
            counter::record_elementwise(tile.len());
            // exponentiate only; each row's normalisation is applied to its
            // c' aggregated values below rather than to its HW affinities
            for (row, total) in tile.chunks_exact_mut(positions).zip(totals.iter_mut()) {
                *total = ops::exp_unnormalised(row).recip();
            }
            // aggregated[:, rows] = g · Aᵀ[:, rows]
            gemm(
                inner,
                positions,
                rows,
                gi,
                Strides::row_major(positions),
                tile,
                Strides::transposed(positions),
                &mut agg[r0..],
                Strides::row_major(positions),
                false,
            );
            for d in 0..inner {
                let out = &mut agg[d * positions + r0..d * positions + r0 + rows];
                out.iter_mut().zip(&totals).for_each(|(v, &inv)| *v = *v * inv);
            }
        }
    }
    let aggregated = Tensor::new(&[n_items, inner, h, wd], aggregated)?;
    let out = ops::add(x, &ops::conv1x1(&aggregated, &w.w_out, None)?)?;
    Ok(out)
}

/// Intermediates of the non-local forward pass. Per-item matrices are
/// `[c', HW]` projections and `[HW, HW]` affinities.
#[derive(Clone, Debug)]
pub struct NlTrace<T: Scalar> {
    pub theta: Vec<Tensor<T>>,
    pub phi: Vec<Tensor<T>>,
    pub g: Vec<Tensor<T>>,
    /// Row-normalised affinity per item.
    pub affinity: Vec<Tensor<T>>,
    pub aggregated: Tensor<T>,
    pub output: Tensor<T>,
}

pub fn nonlocal_trace<T: Scalar>(x: &Tensor<T>, w: &NlWeights<T>) -> Result<NlTrace<T>> {
    check_input(x, w)?;
    let (n_items, _, h, wd) = x.nchw()?;
    let split = |t: &Tensor<T>| (0..n_items).map(|i| t.item_matrix(i)).collect::<Result<Vec<_>>>();
    let theta = split(&ops::conv1x1(x, &w.w_theta, None)?)?;
    let phi = split(&ops::conv1x1(x, &w.w_phi, None)?)?;
    let g = split(&ops::conv1x1(x, &w.w_g, None)?)?;
    let mut affinity = Vec::with_capacity(n_items);
    let mut aggregated = Vec::with_capacity(n_items);
    for i in 0..n_items {
        let scores = ops::matmul(&ops::transpose(&theta[i])?, &phi[i])?;
        let a = ops::softmax(&scores, 1)?;
        aggregated.push(ops::matmul(&g[i], &ops::transpose(&a)?)?);
        affinity.push(a);
    }
    let aggregated = Tensor::stack_items(&aggregated, h, wd)?;
    let output = ops::add(x, &ops::conv1x1(&aggregated, &w.w_out, None)?)?;
    Ok(NlTrace {
        theta,
        phi,
        g,
        affinity,
        aggregated,
        output,
    })
}

#[derive(Clone, Debug)]
pub struct NlGrads<T: Scalar = f64> {
    pub x: Tensor<T>,
    pub w_theta: Tensor<T>,
    pub w_phi: Tensor<T>,
    pub w_g: Tensor<T>,
    pub w_out: Tensor<T>,
}

pub fn nonlocal_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &NlWeights<T>,
    grad_y: &Tensor<T>,
) -> Result<NlGrads<T>> {
    let t = nonlocal_trace(x, w)?;
    if grad_y.shape() != x.shape() {
        return Err(Error::dim("nonlocal_backward", x.shape(), grad_y.shape()));
    }
    let (n_items, _, h, wd) = x.nchw()?;
    let out_grads = ops::conv1x1_backward(&t.aggregated, &w.w_out, false, grad_y)?;
    let mut d_theta = Vec::with_capacity(n_items);
    let mut d_phi = Vec::with_capacity(n_items);
    let mut d_g = Vec::with_capacity(n_items);
    for i in 0..n_items {
        let d_agg = out_grads.x.item_matrix(i)?;
        let a_t = ops::transpose(&t.affinity[i])?;
        let (dg, d_a_t) = ops::matmul_backward(&t.g[i], &a_t, &d_agg)?;
        let d_a = ops::transpose(&d_a_t)?;
        let d_scores = ops::softmax_backward(&t.affinity[i], &d_a, 1)?;
        let theta_t = ops::transpose(&t.theta[i])?;
        let (d_theta_t, dphi) = ops::matmul_backward(&theta_t, &t.phi[i], &d_scores)?;
        d_theta.push(ops::transpose(&d_theta_t)?);
        d_phi.push(dphi);
        d_g.push(dg);
    }
    let gt = ops::conv1x1_backward(x, &w.w_theta, false, &Tensor::stack_items(&d_theta, h, wd)?)?;
    let gp = ops::conv1x1_backward(x, &w.w_phi, false, &Tensor::stack_items(&d_phi, h, wd)?)?;
    let gg = ops::conv1x1_backward(x, &w.w_g, false, &Tensor::stack_items(&d_g, h, wd)?)?;
    let dx = ops::add(&ops::add(grad_y, &gt.x)?, &ops::add(&gp.x, &gg.x)?)?;
    Ok(NlGrads {
        x: dx,
        w_theta: gt.w,
        w_phi: gp.w,
        w_g: gg.w,
        w_out: out_grads.w,
    })
}
