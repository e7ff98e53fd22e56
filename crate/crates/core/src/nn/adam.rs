use serde::{Deserialize, Serialize};

use super::{Matrix, Param};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers are allocated on the first step
/// and matched to parameters by position.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Result<Self> {
        if !(config.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", config.lr)));
        }
        Ok(Adam {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Updates every trainable parameter in place from its accumulated gradient.
    pub fn step(&mut self, params: &mut [&mut Param]) -> Result<()> {
        let trainable: Vec<usize> = (0..params.len()).filter(|&i| params[i].trainable).collect();
        if self.first.is_empty() {
            for &i in &trainable {
                let (r, c) = params[i].value.shape();
                self.first.push(Matrix::zeros(r, c));
                self.second.push(Matrix::zeros(r, c));
            }
        }
        if self.first.len() != trainable.len() {
            return Err(Error::shape("adam_step", self.first.len(), trainable.len()));
        }
        for (slot, &i) in trainable.iter().enumerate() {
            let p = &params[i];
            if p.grad.shape() != self.first[slot].shape() || p.value.shape() != p.grad.shape() {
                return Err(Error::shape("adam_step", format!("{:?}", self.first[slot].shape()), format!("{:?} ({})", p.grad.shape(), p.name)));
            }
            if p.grad.data().iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of `{}`", p.name)));
            }
        }

        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (slot, &i) in trainable.iter().enumerate() {
            let p = &mut params[i];
            let m = self.first[slot].data_mut();
            let v = self.second[slot].data_mut();
            let grads = p.grad.data();
            for (k, w) in p.value.data_mut().iter_mut().enumerate() {
                let g = grads[k];
                m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
