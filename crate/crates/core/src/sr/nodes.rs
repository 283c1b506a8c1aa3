use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// A squeezed vector viewed as `m × k`: column `j` holds node `j`'s features,
/// which are the contiguous channels `[j·m, (j+1)·m)` of the vector.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeMatrix<T: Scalar = f64> {
    values: Tensor<T>,
}

impl<T: Scalar> NodeMatrix<T> {
    pub fn from_vector(v: &[T], m: usize, k: usize) -> Result<Self> {
        if v.len() != m * k {
            return Err(Error::dim("NodeMatrix::from_vector", &[v.len()], &[m, k]));
        }
        Ok(NodeMatrix {
            values: Tensor::from_fn(&[m, k], |i| v[(i % k) * m + i / k])?,
        })
    }

    pub fn from_tensor(values: Tensor<T>) -> Result<Self> {
        values.dims2()?;
        Ok(NodeMatrix { values })
    }

    /// Inverse of [`NodeMatrix::from_vector`].
    pub fn flatten(&self) -> Vec<T> {
        let (m, k) = self.dims();
        (0..m * k)
            .map(|c| self.values.data()[(c % m) * k + c / m])
            .collect()
    }

    pub fn values(&self) -> &Tensor<T> {
        &self.values
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.values
    }

    /// `(m, k)`.
    pub fn dims(&self) -> (usize, usize) {
        self.values.dims2().expect("node matrix is rank 2")
    }

    pub fn node_feature(&self, node: usize) -> Vec<T> {
        let (m, k) = self.dims();
        (0..m).map(|i| self.values.data()[i * k + node]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn groups_are_contiguous_channel_blocks() {
        let v: Vec<f64> = (0..6).map(f64::from).collect();
        let g = NodeMatrix::from_vector(&v, 2, 3).unwrap();
        assert_eq!(g.node_feature(0), vec![0.0, 1.0]);
        assert_eq!(g.node_feature(2), vec![4.0, 5.0]);
        assert_eq!(g.values().get(&[1, 1]), 3.0);
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(NodeMatrix::from_vector(&[1.0f64; 5], 2, 3).is_err());
    }

    proptest! {
        #[test]
        fn flatten_inverts_grouping(m in 1usize..6, k in 1usize..6, seed in any::<u32>()) {
            let v: Vec<f64> = (0..m * k).map(|i| f64::from(seed ^ i as u32)).collect();
            let g = NodeMatrix::from_vector(&v, m, k).unwrap();
            prop_assert_eq!(g.flatten(), v);
        }
    }
}
