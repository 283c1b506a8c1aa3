use crate::error::{Error, Result};
use crate::ops;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Reduce channels with `w_reduce_b`, then average over positions.
/// Returns `[N, c_reduced]`.
pub fn squeeze_gap<T: Scalar>(x: &Tensor<T>, w_reduce_b: &Tensor<T>) -> Result<Tensor<T>> {
    ops::global_avg_pool(&ops::conv1x1(x, w_reduce_b, None)?)
}

/// Project `x` twice, `B = w_reduce_b·x` and `C = w_reduce_c·x`, and sum
/// `b_i ∘ c_i` over all positions `i`. This is a sum, not a mean.
pub fn squeeze_ghp<T: Scalar>(
    x: &Tensor<T>,
    w_reduce_b: &Tensor<T>,
    w_reduce_c: Option<&Tensor<T>>,
) -> Result<Tensor<T>> {
    let w_reduce_c = w_reduce_c
        .ok_or_else(|| Error::Config("Hadamard pooling needs the w_reduce_c projection".into()))?;
    let b = ops::conv1x1(x, w_reduce_b, None)?;
    let c = ops::conv1x1(x, w_reduce_c, None)?;
    ops::hadamard_pool(&b, &c)
}

/// Second-order (outer-product) pooling `B·Cᵀ = Σ_i b_i c_iᵀ` for two
/// `[C', HW]` maps. Reference only: its diagonal is what Hadamard pooling
/// keeps.
pub fn bilinear_pool_reference<T: Scalar>(b: &Tensor<T>, c: &Tensor<T>) -> Result<Tensor<T>> {
    b.dims2()?;
    if b.shape() != c.shape() {
        return Err(Error::dim("bilinear_pool_reference", b.shape(), c.shape()));
    }
    ops::matmul(b, &ops::transpose(c)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_of_constant_map_selects_channel() {
        let x = Tensor::<f64>::from_fn(&[1, 4, 3, 2], |i| 1.0 + (i / 6) as f64).unwrap();
        // row 0 picks channel 2, row 1 picks channel 0
        let w = Tensor::from_fn(&[2, 4], |i| if i == 2 || i == 4 { 1.0 } else { 0.0 }).unwrap();
        let out = squeeze_gap(&x, &w).unwrap();
        assert_eq!(out.data(), [3.0, 1.0]);
    }

    #[test]
    fn ghp_of_unit_maps_is_position_count() {
        let x = Tensor::<f64>::ones(&[1, 3, 4, 5]).unwrap();
        let w = Tensor::from_fn(&[2, 3], |i| if i % 3 == 0 { 1.0 } else { 0.0 }).unwrap();
        let out = squeeze_ghp(&x, &w, Some(&w)).unwrap();
        assert_eq!(out.data(), [20.0, 20.0]);
    }

    #[test]
    fn ghp_with_zero_c_path_is_zero() {
        let x = Tensor::<f64>::from_fn(&[2, 3, 2, 2], |i| (i as f64).sin()).unwrap();
        let wb = Tensor::from_fn(&[2, 3], |i| i as f64 - 2.0).unwrap();
        let wc = Tensor::zeros(&[2, 3]).unwrap();
        let out = squeeze_ghp(&x, &wb, Some(&wc)).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ghp_without_c_projection_is_config_error() {
        let x = Tensor::<f64>::ones(&[1, 3, 2, 2]).unwrap();
        let w = Tensor::ones(&[2, 3]).unwrap();
        assert!(matches!(squeeze_ghp(&x, &w, None), Err(Error::Config(_))));
    }

    #[test]
    fn bilinear_of_one_hot_is_outer_product() {
        let col = [0.0, 2.0, -1.0];
        let b = Tensor::<f64>::from_fn(&[3, 4], |i| if i % 4 == 1 { col[i / 4] } else { 0.0 }).unwrap();
        let g = bilinear_pool_reference(&b, &b).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(g.get(&[r, c]), col[r] * col[c]);
            }
        }
        let zero = Tensor::zeros(&[3, 4]).unwrap();
        let z = bilinear_pool_reference(&zero, &b).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
        assert!(bilinear_pool_reference(&b, &Tensor::zeros(&[3, 5]).unwrap()).is_err());
    }
}
