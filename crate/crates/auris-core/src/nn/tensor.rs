//! Dense row-major tensor used throughout the network engine.
//!
//! Layout conventions:
//! * feature maps are `(batch, freq, time, channels)` with channels innermost,
//! * flat activations are `(batch, width)`,
//! * convolution kernels are `(kf, kt, c_in, c_out)`,
//! * dense weights are `(out, in)`.

use crate::error::{Error, Result};
use crate::nn::scalar::Element;

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F: Element = f32> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Element> Tensor<F> {
    /// Zero-filled tensor of the given shape.
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![F::zero(); n] }
    }

    /// Builds a tensor from existing data; the element count must match.
    pub fn from_vec(shape: &[usize], data: Vec<F>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "tensor shape {:?} wants {} elements, got {}",
                shape,
                n,
                data.len()
            )));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    /// Tensor shape as a slice.
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Total element count.
    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Immutable view of the underlying buffer.
    pub fn data(&self) -> &[F] {
        &self.data
    }

    /// Mutable view of the underlying buffer.
    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    /// Reinterprets the buffer under a new shape with the same element count.
    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {} elements into {:?}",
                self.data.len(),
                shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Elementwise in-place accumulate: `self += other`.
    pub fn add_assign(&mut self, other: &Tensor<F>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "add_assign of {:?} into {:?}",
                other.shape, self.shape
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a = *a + b;
        }
        Ok(())
    }

    /// Scales every element in place.
    pub fn scale(&mut self, s: F) {
        for a in self.data.iter_mut() {
            *a = *a * s;
        }
    }

    /// Sets every element to zero, keeping the allocation.
    pub fn fill_zero(&mut self) {
        for a in self.data.iter_mut() {
            *a = F::zero();
        }
    }

    /// True if every element is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Converts the element type (used when checkpoints, which store `f32`,
    /// meet the `f64` verification mode).
    pub fn cast<G: Element>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| G::of(v.as_f64())).collect(),
        }
    }

    /// Batch size, assuming dimension 0 is the batch dimension.
    pub fn batch(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Per-item element count (everything except dimension 0).
    pub fn item_len(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    /// Slice holding batch item `b`.
    pub fn item(&self, b: usize) -> &[F] {
        let n = self.item_len();
        &self.data[b * n..(b + 1) * n]
    }

    /// Mutable slice holding batch item `b`.
    pub fn item_mut(&mut self, b: usize) -> &mut [F] {
        let n = self.item_len();
        &mut self.data[b * n..(b + 1) * n]
    }
}

impl Tensor<f32> {
    /// Widens to `f64` (convenience for the verification mode).
    pub fn widen(&self) -> Tensor<f64> {
        self.cast()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_wrong_element_count() {
        assert!(Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn item_views_partition_the_buffer() {
        let t = Tensor::from_vec(&[2, 3], vec![1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(t.item(0), &[1.0, 2.0, 3.0]);
        assert_eq!(t.item(1), &[4.0, 5.0, 6.0]);
        assert_eq!(t.batch(), 2);
        assert_eq!(t.item_len(), 3);
    }

    #[test]
    fn cast_round_trips_values() {
        let t = Tensor::from_vec(&[3], vec![0.5f32, -1.25, 3.0]).unwrap();
        let d: Tensor<f64> = t.cast();
        let back: Tensor<f32> = d.cast();
        assert_eq!(t, back);
    }
}
