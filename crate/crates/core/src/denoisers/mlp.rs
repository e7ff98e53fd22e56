use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_timesteps, timestep_embed_batch, Denoiser};
use crate::nn::{relu, relu_backward, Layer, Linear, Matrix, Mode, Param};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub d_in: usize,
    pub hidden_widths: Vec<usize>,
}

impl MlpConfig {
    /// Two hidden layers of 256 units.
    pub fn new(d_in: usize) -> Self {
        MlpConfig {
            d_in,
            hidden_widths: vec![256, 256],
        }
    }
}

/// `Linear → (+ timestep embedding) → ReLU → … → Linear`.
#[derive(Debug, Clone)]
pub struct MlpNet {
    pub config: MlpConfig,
    pub hidden: Vec<Linear>,
    pub output: Linear,
    pre_activations: Vec<Matrix>,
}

impl MlpNet {
    pub fn new(config: MlpConfig, rng: &mut impl Rng) -> Result<Self> {
        if config.hidden_widths.is_empty() {
            return Err(Error::Config("the MLP denoiser needs at least one hidden layer".into()));
        }
        if config.d_in == 0 || config.hidden_widths.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        let mut hidden = Vec::new();
        let mut prev = config.d_in;
        for (i, &w) in config.hidden_widths.iter().enumerate() {
            hidden.push(Linear::new(&format!("hidden.{i}"), prev, w, rng));
            prev = w;
        }
        let output = Linear::new("output", prev, config.d_in, rng);
        Ok(MlpNet {
            config,
            hidden,
            output,
            pre_activations: Vec::new(),
        })
    }
}

impl Denoiser for MlpNet {
    fn forward(&mut self, x: &Matrix, t: &[usize], mode: Mode) -> Result<Matrix> {
        if x.cols() != self.config.d_in {
            return Err(Error::shape("mlp_forward", self.config.d_in, x.cols()));
        }
        check_timesteps(x, t)?;
        self.pre_activations.clear();
        let mut h = x.clone();
        for (i, layer) in self.hidden.iter_mut().enumerate() {
            let mut z = layer.forward(&h, mode)?;
            if i == 0 {
                z.add_assign(&timestep_embed_batch(t, z.cols()))?;
            }
            h = relu(&z);
            self.pre_activations.push(z);
        }
        let y = self.output.forward(&h, mode)?;
        y.ensure_finite("mlp output")?;
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        if self.pre_activations.len() != self.hidden.len() {
            return Err(Error::Config("mlp backward before forward".into()));
        }
        let mut g = self.output.backward(grad_out)?;
        for (layer, z) in self.hidden.iter_mut().zip(&self.pre_activations).rev() {
            g = relu_backward(z, &g)?;
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p: Vec<&mut Param> = self.hidden.iter_mut().flat_map(|l| l.params_mut()).collect();
        p.extend(self.output.params_mut());
        p
    }

    fn params(&self) -> Vec<&Param> {
        let mut p: Vec<&Param> = self.hidden.iter().flat_map(|l| l.params()).collect();
        p.extend(self.output.params());
        p
    }

    fn d_in(&self) -> usize {
        self.config.d_in
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoisers::Conditioned;
    use crate::nn::grad_check;
    use crate::rng::seeded;

    #[test]
    fn shape_and_zero_output_weights() {
        let mut rng = seeded(1);
        let mut net = MlpNet::new(MlpConfig { d_in: 3, hidden_widths: vec![8] }, &mut rng).unwrap();
        let x = Matrix::randn(4, 3, &mut rng);
        assert_eq!(net.forward(&x, &[1, 2, 3, 4], Mode::Train).unwrap().shape(), (4, 3));
        net.output = Linear::from_parts("output", Matrix::zeros(3, 8), Matrix::row_vector(&[0.1, -0.2, 0.3]));
        let y = net.forward(&x, &[7; 4], Mode::Eval).unwrap();
        for i in 0..4 {
            assert_eq!(y.row(i), &[0.1, -0.2, 0.3]);
        }
        assert!(MlpNet::new(MlpConfig { d_in: 3, hidden_widths: vec![] }, &mut rng).is_err());
    }

    #[test]
    fn gradients() {
        let mut rng = seeded(2);
        let mut net = MlpNet::new(MlpConfig { d_in: 4, hidden_widths: vec![8, 6] }, &mut rng).unwrap();
        let x = Matrix::randn(5, 4, &mut rng);
        let r = Matrix::randn(5, 4, &mut rng);
        let loss = move |y: &Matrix| (y.hadamard(&r).unwrap().sum(), r.clone());
        let mut layer = Conditioned { model: &mut net, t: vec![1, 2, 3, 40, 100] };
        let report = grad_check(&mut layer, &x, Mode::Train, &loss, 5000).unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}
