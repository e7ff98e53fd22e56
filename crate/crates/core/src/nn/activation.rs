use super::{Layer, Matrix, Mode, Param};
use crate::{Error, Result};

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

/// Gradient of ReLU given the forward input; the kink at 0 takes slope 0.
pub fn relu_backward(x: &Matrix, grad_out: &Matrix) -> Result<Matrix> {
    x.zip_map(grad_out, |v, g| if v > 0.0 { g } else { 0.0 })
}

pub fn sigmoid(x: &Matrix) -> Matrix {
    x.map(sigmoid_scalar)
}

pub(crate) fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Gradient of the sigmoid given its forward output `y`.
pub fn sigmoid_backward(y: &Matrix, grad_out: &Matrix) -> Result<Matrix> {
    y.zip_map(grad_out, |s, g| g * s * (1.0 - s))
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        softmax_in_place(out.row_mut(i));
    }
    out
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Gradient of row-wise softmax given its forward output `y`:
/// `dx = y ⊙ (dy − rowsum(dy ⊙ y))`.
pub fn softmax_rows_backward(y: &Matrix, grad_out: &Matrix) -> Result<Matrix> {
    if y.shape() != grad_out.shape() {
        return Err(Error::shape("softmax_rows_backward", format!("{:?}", y.shape()), format!("{:?}", grad_out.shape())));
    }
    let mut dx = Matrix::zeros(y.rows(), y.cols());
    for i in 0..y.rows() {
        let (yr, gr) = (y.row(i), grad_out.row(i));
        let s: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
        for (j, v) in dx.row_mut(i).iter_mut().enumerate() {
            *v = yr[j] * (gr[j] - s);
        }
    }
    Ok(dx)
}

macro_rules! stateless_layer {
    ($name:ident, $fwd:expr, $bwd:expr, $cache_output:expr) => {
        #[derive(Debug, Clone, Default)]
        pub struct $name {
            cache: Option<Matrix>,
        }

        impl Layer for $name {
            fn forward(&mut self, x: &Matrix, _mode: Mode) -> Result<Matrix> {
                let y = $fwd(x);
                self.cache = Some(if $cache_output { y.clone() } else { x.clone() });
                Ok(y)
            }

            fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
                let cache = self
                    .cache
                    .as_ref()
                    .ok_or_else(|| Error::Config(concat!(stringify!($name), " backward before forward").into()))?;
                $bwd(cache, grad_out)
            }

            fn params_mut(&mut self) -> Vec<&mut Param> {
                Vec::new()
            }

            fn params(&self) -> Vec<&Param> {
                Vec::new()
            }
        }
    };
}

stateless_layer!(Relu, relu, relu_backward, false);
stateless_layer!(Sigmoid, sigmoid, sigmoid_backward, true);
stateless_layer!(Softmax, softmax_rows, softmax_rows_backward, true);
