//! Dense n-dimensional `f64` arrays.
//!
//! A [`Tensor`] is a row-major buffer with a shape and an optional gradient
//! slot of the same shape. It carries inputs, perturbations, activations and
//! logits throughout the crate. Shapes are checked on construction and the
//! invariant `product(shape) == data.len()` holds for every value handed out.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Dense n-dimensional real array with an optional gradient slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
}

pub(crate) fn shape_string(shape: &[usize]) -> String {
    let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
    format!("[{}]", dims.join("x"))
}

impl Tensor {
    /// Build a tensor from a shape and matching data buffer.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) || expected != data.len() {
            return Err(Error::ShapeMismatch {
                context: "Tensor::new".into(),
                expected: format!("{} elements for shape {}", expected, shape_string(&shape)),
                got: format!("{} elements", data.len()),
            });
        }
        Ok(Self {
            shape,
            data,
            grad: None,
        })
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
            grad: None,
        }
    }

    /// 1-D tensor from a slice.
    pub fn from_slice(values: &[f64]) -> Self {
        Self {
            shape: vec![values.len()],
            data: values.to_vec(),
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Gradient buffer, if one has been attached.
    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    /// Attach a gradient of identical shape.
    pub fn set_grad(&mut self, grad: Vec<f64>) -> Result<()> {
        if grad.len() != self.data.len() {
            return Err(Error::ShapeMismatch {
                context: "Tensor::set_grad".into(),
                expected: format!("{} elements", self.data.len()),
                got: format!("{} elements", grad.len()),
            });
        }
        self.grad = Some(grad);
        Ok(())
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// Number of samples when the leading axis is a batch axis.
    pub fn batch_len(&self) -> usize {
        self.shape[0]
    }

    /// Elements per sample for a batched tensor.
    pub fn sample_len(&self) -> usize {
        self.data.len() / self.shape[0]
    }

    /// Borrow the i-th sample of a batched tensor as a flat slice.
    pub fn sample(&self, i: usize) -> &[f64] {
        let k = self.sample_len();
        &self.data[i * k..(i + 1) * k]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut [f64] {
        let k = self.sample_len();
        &mut self.data[i * k..(i + 1) * k]
    }

    /// Shape of one sample (batch axis stripped).
    pub fn sample_shape(&self) -> &[usize] {
        &self.shape[1..]
    }

    /// Stack equally shaped sample tensors into one batched tensor.
    pub fn stack(samples: &[&Tensor]) -> Result<Tensor> {
        let first = samples.first().ok_or_else(|| {
            Error::InvalidConfig("Tensor::stack needs at least one sample".into())
        })?;
        let mut data = Vec::with_capacity(samples.len() * first.len());
        for s in samples {
            if s.shape() != first.shape() {
                return Err(Error::ShapeMismatch {
                    context: "Tensor::stack".into(),
                    expected: shape_string(first.shape()),
                    got: shape_string(s.shape()),
                });
            }
            data.extend_from_slice(s.data());
        }
        let mut shape = Vec::with_capacity(first.shape.len() + 1);
        shape.push(samples.len());
        shape.extend_from_slice(first.shape());
        Tensor::new(shape, data)
    }

    /// Extract the i-th sample of a batched tensor as its own tensor.
    pub fn unstack(&self, i: usize) -> Tensor {
        Tensor {
            shape: self.sample_shape().to_vec(),
            data: self.sample(i).to_vec(),
            grad: None,
        }
    }

    /// True when every element is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute componentwise difference to another tensor.
    pub fn linf_distance(&self, other: &Tensor) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }
}
