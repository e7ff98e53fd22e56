//! Noise-prediction networks `z(S_t, t)`.
//!
//! [`SemstNet`] stacks residual blocks whose indirect branch is
//! `attention(FC(x)) − threshold(FC(x))`; [`MlpNet`] is the plain MLP
//! baseline. Both condition on the timestep through an additive sinusoidal
//! embedding and end in an affine projection back to the data width.

mod attention;
mod embed;
mod mlp;
mod semst;

pub use attention::MultiHeadSelfAttention;
pub use embed::{timestep_embed, timestep_embed_batch};
pub use mlp::{MlpConfig, MlpNet};
pub use semst::{FcBlock, SemstBlock, SemstConfig, SemstNet, SoftThreshold};

use serde::{Deserialize, Serialize};

use crate::nn::{Layer, Matrix, Mode, Param};
use crate::rng::seeded;
use crate::{Error, Result};

/// A trainable noise predictor.
pub trait Denoiser {
    /// `x` is `n × d_in`, `t` holds one timestep per row.
    fn forward(&mut self, x: &Matrix, t: &[usize], mode: Mode) -> Result<Matrix>;

    fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix>;

    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn params(&self) -> Vec<&Param>;

    fn d_in(&self) -> usize;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.grad.fill(0.0);
        }
    }
}

/// Architecture selector plus hyperparameters; enough to rebuild a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Semst(SemstConfig),
    Mlp(MlpConfig),
}

impl Architecture {
    pub fn d_in(&self) -> usize {
        match self {
            Architecture::Semst(c) => c.d_in,
            Architecture::Mlp(c) => c.d_in,
        }
    }

    pub fn with_d_in(&self, d_in: usize) -> Architecture {
        match self {
            Architecture::Semst(c) => Architecture::Semst(SemstConfig { d_in, ..c.clone() }),
            Architecture::Mlp(c) => Architecture::Mlp(MlpConfig { d_in, ..c.clone() }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Semst(_) => "semst",
            Architecture::Mlp(_) => "mlp",
        }
    }

    pub fn build(&self, seed: u64) -> Result<Network> {
        let mut rng = seeded(seed);
        Ok(match self {
            Architecture::Semst(c) => Network::Semst(SemstNet::new(c.clone(), &mut rng)?),
            Architecture::Mlp(c) => Network::Mlp(MlpNet::new(c.clone(), &mut rng)?),
        })
    }
}

/// Either denoiser behind one concrete type.
#[derive(Debug, Clone)]
pub enum Network {
    Semst(SemstNet),
    Mlp(MlpNet),
}

impl Network {
    pub fn architecture(&self) -> Architecture {
        match self {
            Network::Semst(n) => Architecture::Semst(n.config.clone()),
            Network::Mlp(n) => Architecture::Mlp(n.config.clone()),
        }
    }
}

impl Denoiser for Network {
    fn forward(&mut self, x: &Matrix, t: &[usize], mode: Mode) -> Result<Matrix> {
        match self {
            Network::Semst(n) => n.forward(x, t, mode),
            Network::Mlp(n) => n.forward(x, t, mode),
        }
    }

    fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        match self {
            Network::Semst(n) => n.backward(grad_out),
            Network::Mlp(n) => n.backward(grad_out),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Network::Semst(n) => n.params_mut(),
            Network::Mlp(n) => n.params_mut(),
        }
    }

    fn params(&self) -> Vec<&Param> {
        match self {
            Network::Semst(n) => Denoiser::params(n),
            Network::Mlp(n) => Denoiser::params(n),
        }
    }

    fn d_in(&self) -> usize {
        match self {
            Network::Semst(n) => n.config.d_in,
            Network::Mlp(n) => n.config.d_in,
        }
    }
}

/// Adapts a denoiser with fixed per-row timesteps to the [`Layer`] interface,
/// mainly so the gradient checker can drive it.
pub struct Conditioned<'a, D: Denoiser + ?Sized> {
    pub model: &'a mut D,
    pub t: Vec<usize>,
}

impl<D: Denoiser + ?Sized> Layer for Conditioned<'_, D> {
    fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        self.model.forward(x, &self.t, mode)
    }

    fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        self.model.backward(grad_out)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.model.params_mut()
    }

    fn params(&self) -> Vec<&Param> {
        self.model.params()
    }
}

pub(crate) fn check_timesteps(x: &Matrix, t: &[usize]) -> Result<()> {
    if t.len() != x.rows() {
        return Err(Error::shape("denoiser timesteps", x.rows(), t.len()));
    }
    Ok(())
}
