use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_RANK: usize = 4;

/// Dense row-major tensor of rank 1 to 4. Feature maps are laid out NCHW.
///
/// A tensor is never mutated once it has been handed to an operation; ops
/// always allocate their outputs.
#[derive(Clone, PartialEq)]
pub struct Tensor<T: Scalar = f64> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const PREVIEW: usize = 8;
        let head: Vec<_> = self.data.iter().take(PREVIEW).collect();
        write!(f, "Tensor<{}>{:?} {:?}", T::NAME, self.shape, head)?;
        if self.data.len() > PREVIEW {
            write!(f, " ..")?;
        }
        Ok(())
    }
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.len() > MAX_RANK {
        return Err(Error::Shape {
            shape: shape.to_vec(),
            reason: format!("rank must be between 1 and {MAX_RANK}"),
        });
    }
    if shape.contains(&0) {
        return Err(Error::Shape {
            shape: shape.to_vec(),
            reason: "every extent must be at least 1".into(),
        });
    }
    Ok(shape.iter().product())
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != data.len() {
            return Err(Error::Shape {
                shape: shape.to_vec(),
                reason: format!("expected {len} elements, got {}", data.len()),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn full(shape: &[usize], value: T) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![value; len],
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: &[usize]) -> Result<Self> {
        Self::full(shape, T::one())
    }

    /// Builds a tensor from a function of the flat row-major index.
    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> T) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: (0..len).map(f).collect(),
        })
    }

    pub fn eye(n: usize) -> Result<Self> {
        Self::from_fn(&[n, n], |i| {
            if i / n == i % n {
                T::one()
            } else {
                T::zero()
            }
        })
    }

    /// Uniform samples in `[-bound, bound)`.
    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Result<Self> {
        Self::from_fn(shape, |_| T::from_f64_lossy(rng.gen_range(-bound..bound)))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != self.data.len() {
            return Err(Error::dim("reshape", &self.shape, shape));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data,
        })
    }

    /// Interprets a rank-4 tensor as `(N, C, H, W)`.
    pub fn nchw(&self) -> Result<(usize, usize, usize, usize)> {
        match *self.shape.as_slice() {
            [n, c, h, w] => Ok((n, c, h, w)),
            _ => Err(Error::Shape {
                shape: self.shape.clone(),
                reason: "expected an NCHW feature map".into(),
            }),
        }
    }

    /// Interprets a rank-2 tensor as `(rows, cols)`.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match *self.shape.as_slice() {
            [r, c] => Ok((r, c)),
            _ => Err(Error::Shape {
                shape: self.shape.clone(),
                reason: "expected a matrix".into(),
            }),
        }
    }

    pub fn get(&self, index: &[usize]) -> T {
        self.data[self.offset(index)]
    }

    fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.shape.len(), "index rank mismatch");
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &extent)| {
                assert!(i < extent, "index {index:?} out of bounds for {:?}", self.shape);
                acc * extent + i
            })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v)
    }

    /// Inner product of two equally shaped tensors.
    pub fn dot(&self, other: &Self) -> Result<T> {
        if self.shape != other.shape {
            return Err(Error::dim("dot", &self.shape, &other.shape));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::dim("max_abs_diff", &self.shape, &other.shape));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs().as_f64())
            .fold(0.0, f64::max))
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Returns the flat index of the first non-finite element, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }

    /// Copies batch item `n` of an NCHW tensor into a `(C, H·W)` matrix.
    pub fn item_matrix(&self, n: usize) -> Result<Self> {
        let (batch, c, h, w) = self.nchw()?;
        if n >= batch {
            return Err(Error::Shape {
                shape: self.shape.clone(),
                reason: format!("batch index {n} out of range"),
            });
        }
        let len = c * h * w;
        Tensor::new(&[c, h * w], self.data[n * len..(n + 1) * len].to_vec())
    }

    /// Stacks `(C, H·W)` item matrices back into an NCHW tensor.
    pub fn stack_items(items: &[Self], h: usize, w: usize) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::Shape {
            shape: vec![0],
            reason: "cannot stack an empty batch".into(),
        })?;
        let (c, hw) = first.dims2()?;
        if hw != h * w {
            return Err(Error::dim("stack_items", first.shape(), &[c, h, w]));
        }
        let mut data = Vec::with_capacity(items.len() * c * hw);
        for item in items {
            if item.shape() != first.shape() {
                return Err(Error::dim("stack_items", first.shape(), item.shape()));
            }
            data.extend_from_slice(item.data());
        }
        Tensor::new(&[items.len(), c, h, w], data)
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|&v| U::from_f64_lossy(v.as_f64()))
                .collect(),
        }
    }
}

/// Checks an op output for NaN/Inf in debug and test builds only.
#[inline]
pub(crate) fn debug_check_finite<T: Scalar>(t: &Tensor<T>, op: &'static str) -> Result<()> {
    if cfg!(debug_assertions) {
        if let Some(index) = t.first_non_finite() {
            return Err(Error::NonFinite {
                context: format!("{op} output"),
                index,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Tensor::<f64>::zeros(&[]).is_err());
        assert!(Tensor::<f64>::zeros(&[1, 2, 3, 4, 5]).is_err());
        assert!(Tensor::<f64>::zeros(&[2, 0]).is_err());
        assert!(Tensor::<f64>::new(&[2, 2], vec![1.0; 3]).is_err());
    }

    #[test]
    fn row_major_indexing() {
        let t = Tensor::<f64>::from_fn(&[2, 3, 4], |i| i as f64).unwrap();
        assert_eq!(t.get(&[1, 2, 3]), 23.0);
        assert_eq!(t.get(&[0, 1, 0]), 4.0);
    }

    #[test]
    fn item_matrix_roundtrip() {
        let t = Tensor::<f64>::from_fn(&[2, 3, 2, 2], |i| i as f64).unwrap();
        let items: Vec<_> = (0..2).map(|n| t.item_matrix(n).unwrap()).collect();
        assert_eq!(items[1].get(&[0, 0]), 12.0);
        assert_eq!(Tensor::stack_items(&items, 2, 2).unwrap(), t);
    }

    #[test]
    fn reshape_preserves_data() {
        let t = Tensor::<f64>::from_fn(&[6], |i| i as f64).unwrap();
        let r = t.clone().reshape(&[2, 3]).unwrap();
        assert_eq!(r.data(), t.data());
        assert!(r.reshape(&[4]).is_err());
    }
}
