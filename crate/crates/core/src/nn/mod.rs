//! Minimal differentiable substrate: dense matrices, the handful of layers the
//! denoisers are built from, exact hand-written backward passes, Adam, and a
//! central-difference gradient checker.
//!
//! Layers cache whatever their backward pass needs during `forward`, so a
//! `backward` call always refers to the most recent forward. Parameter
//! gradients accumulate across backward calls until [`Layer::zero_grad`].

mod activation;
mod adam;
mod batchnorm;
mod gradcheck;
mod linear;
mod matrix;

pub use activation::{relu, relu_backward, sigmoid, sigmoid_backward, softmax_rows, softmax_rows_backward, Relu, Sigmoid, Softmax};
pub(crate) use activation::{sigmoid_scalar, softmax_in_place};
pub use adam::{Adam, AdamConfig};
pub use batchnorm::BatchNorm;
pub use gradcheck::{grad_check, relative_error, GradCheckReport, DEFAULT_PARAM_CAP, FD_STEP, NOISE_FLOOR};
pub use linear::Linear;
pub use matrix::Matrix;

use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A named tensor together with its gradient accumulator. Non-trainable
/// entries (batch-norm running statistics) are part of model state but are
/// skipped by the optimizer and the gradient checker.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    pub trainable: bool,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Param {
            name: name.into(),
            value,
            grad,
            trainable: true,
        }
    }

    pub fn buffer(name: impl Into<String>, value: Matrix) -> Self {
        Param {
            trainable: false,
            ..Param::new(name, value)
        }
    }
}

pub trait Layer {
    fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix>;

    /// Returns the gradient w.r.t. the last forward input and accumulates
    /// parameter gradients.
    fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix>;

    /// All state tensors in a fixed order, trainable or not.
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn params(&self) -> Vec<&Param>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.grad.fill(0.0);
        }
    }

    fn trainable_count(&self) -> usize {
        self.params().iter().filter(|p| p.trainable).map(|p| p.value.len()).sum()
    }
}

/// Glorot-style uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
