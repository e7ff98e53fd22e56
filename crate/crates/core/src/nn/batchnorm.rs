use super::{Layer, Matrix, Mode, Param};
use crate::{Error, Result};

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
struct Cache {
    x_hat: Matrix,
    inv_std: Vec<f64>,
    mode: Mode,
}

/// Per-feature batch normalization over the rows of a batch.
///
/// Train mode normalizes by the biased batch variance and folds the unbiased
/// variance into the running estimate; eval mode uses the running estimates.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Param,
    pub running_var: Param,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<Cache>,
}

impl BatchNorm {
    pub fn new(name: &str, d: usize) -> Self {
        BatchNorm {
            gamma: Param::new(format!("{name}.gamma"), Matrix::filled(1, d, 1.0)),
            beta: Param::new(format!("{name}.beta"), Matrix::zeros(1, d)),
            running_mean: Param::buffer(format!("{name}.running_mean"), Matrix::zeros(1, d)),
            running_var: Param::buffer(format!("{name}.running_var"), Matrix::filled(1, d, 1.0)),
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
            cache: None,
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.value.cols()
    }
}

impl Layer for BatchNorm {
    fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        let d = self.width();
        if x.cols() != d {
            return Err(Error::shape("batchnorm_forward", d, x.cols()));
        }
        let n = x.rows();
        let (mean, var) = match mode {
            Mode::Train => {
                if n < 2 {
                    return Err(Error::Config("batch normalization in train mode needs a batch of at least 2".into()));
                }
                let mean = x.column_means();
                let mut var = vec![0.0; d];
                for i in 0..n {
                    for ((v, &xv), &m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                        *v += (xv - m) * (xv - m);
                    }
                }
                var.iter_mut().for_each(|v| *v /= n as f64);
                let unbiased = n as f64 / (n - 1) as f64;
                let m = self.momentum;
                for j in 0..d {
                    let rm = &mut self.running_mean.value.data_mut()[j];
                    *rm = (1.0 - m) * *rm + m * mean[j];
                    let rv = &mut self.running_var.value.data_mut()[j];
                    *rv = (1.0 - m) * *rv + m * var[j] * unbiased;
                }
                (mean, var)
            }
            Mode::Eval => (
                self.running_mean.value.data().to_vec(),
                self.running_var.value.data().to_vec(),
            ),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut x_hat = x.clone();
        for i in 0..n {
            for (j, v) in x_hat.row_mut(i).iter_mut().enumerate() {
                *v = (*v - mean[j]) * inv_std[j];
            }
        }
        let gamma = self.gamma.value.data();
        let beta = self.beta.value.data();
        let mut y = x_hat.clone();
        for i in 0..n {
            for (j, v) in y.row_mut(i).iter_mut().enumerate() {
                *v = gamma[j] * *v + beta[j];
            }
        }
        y.ensure_finite(&self.gamma.name)?;
        self.cache = Some(Cache { x_hat, inv_std, mode });
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::Config("batchnorm backward before forward".into()))?;
        if grad_out.shape() != cache.x_hat.shape() {
            return Err(Error::shape(
                "batchnorm_backward",
                format!("{:?}", cache.x_hat.shape()),
                format!("{:?}", grad_out.shape()),
            ));
        }
        let (n, d) = grad_out.shape();
        let gamma = self.gamma.value.data().to_vec();
        let mut sum_dy = vec![0.0; d];
        let mut sum_dy_xhat = vec![0.0; d];
        for i in 0..n {
            let g = grad_out.row(i);
            let xh = cache.x_hat.row(i);
            for j in 0..d {
                sum_dy[j] += g[j];
                sum_dy_xhat[j] += g[j] * xh[j];
            }
        }
        for j in 0..d {
            self.gamma.grad.data_mut()[j] += sum_dy_xhat[j];
            self.beta.grad.data_mut()[j] += sum_dy[j];
        }
        let mut dx = Matrix::zeros(n, d);
        match cache.mode {
            Mode::Eval => {
                for i in 0..n {
                    let g = grad_out.row(i);
                    for (j, v) in dx.row_mut(i).iter_mut().enumerate() {
                        *v = g[j] * gamma[j] * cache.inv_std[j];
                    }
                }
            }
            Mode::Train => {
                // dx = γ·inv_std/N · (N·dy − Σdy − x̂·Σ(dy·x̂))
                let nf = n as f64;
                for i in 0..n {
                    let g = grad_out.row(i);
                    let xh = cache.x_hat.row(i);
                    for (j, v) in dx.row_mut(i).iter_mut().enumerate() {
                        *v = gamma[j] * cache.inv_std[j] / nf
                            * (nf * g[j] - sum_dy[j] - xh[j] * sum_dy_xhat[j]);
                    }
                }
            }
        }
        Ok(dx)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta, &mut self.running_mean, &mut self.running_var]
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta, &self.running_mean, &self.running_var]
    }
}
