//! Dense tanh networks with hand-written reverse-mode gradients.
//!
//! All math is `f64`. Hidden layers use `tanh`, the output layer is linear.

mod adam;
mod dense;
mod gradcheck;

pub use adam::{adam_step, AdamState};
pub use dense::{DenseNet, Trace};
pub use gradcheck::{
    compare_gradients, grad_check, numeric_param_gradient, relative_error, GradCheckReport,
};

use alloc::vec::Vec;

/// A shaped block of parameters, the unit of snapshot serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> crate::Result<Self> {
        let expected: usize = shape.iter().product();
        crate::error::contract!(
            expected == data.len(),
            "tensor shape {:?} needs {} values, got {}",
            shape,
            expected,
            data.len()
        );
        Ok(Self { shape, data })
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: alloc::vec![1],
            data: alloc::vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: alloc::vec![data.len()],
            data,
        }
    }
}
