use rand::Rng;

use super::{glorot_bound, Layer, Matrix, Mode, Param};
use crate::{Error, Result};

/// Fully connected layer `Y = X·Wᵀ + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
    input: Option<Matrix>,
}

impl Linear {
    pub fn new(name: &str, d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        let bound = glorot_bound(d_in, d_out);
        Linear::from_parts(
            name,
            Matrix::uniform(d_out, d_in, -bound, bound, rng),
            Matrix::zeros(1, d_out),
        )
    }

    pub fn from_parts(name: &str, weight: Matrix, bias: Matrix) -> Self {
        assert_eq!(bias.shape(), (1, weight.rows()), "bias must be 1 x d_out");
        Linear {
            weight: Param::new(format!("{name}.weight"), weight),
            bias: Param::new(format!("{name}.bias"), bias),
            input: None,
        }
    }

    pub fn d_in(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn d_out(&self) -> usize {
        self.weight.value.rows()
    }
}

impl Layer for Linear {
    fn forward(&mut self, x: &Matrix, _mode: Mode) -> Result<Matrix> {
        if x.cols() != self.d_in() {
            return Err(Error::shape("linear_forward", self.d_in(), x.cols()));
        }
        let y = x.matmul_t(&self.weight.value)?.add_row_broadcast(self.bias.value.data())?;
        y.ensure_finite(&self.weight.name)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let x = self
            .input
            .as_ref()
            .ok_or_else(|| Error::Config("linear backward before forward".into()))?;
        if grad_out.shape() != (x.rows(), self.d_out()) {
            return Err(Error::shape(
                "linear_backward",
                format!("{}x{}", x.rows(), self.d_out()),
                format!("{}x{}", grad_out.rows(), grad_out.cols()),
            ));
        }
        self.weight.grad.add_assign(&grad_out.t_matmul(x)?)?;
        let db = grad_out.column_sums();
        for (g, d) in self.bias.grad.data_mut().iter_mut().zip(db) {
            *g += d;
        }
        grad_out.matmul(&self.weight.value)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }
}
