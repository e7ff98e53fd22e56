use rand::Rng;
use serde::{Deserialize, Serialize};

use super::attention::MultiHeadSelfAttention;
use super::{check_timesteps, timestep_embed_batch, Denoiser};
use crate::nn::{BatchNorm, Layer, Linear, Matrix, Mode, Param, Relu, Sigmoid};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemstConfig {
    pub d_in: usize,
    pub d_hidden: usize,
    pub n_blocks: usize,
    pub n_tokens: usize,
    pub n_heads: usize,
}

impl SemstConfig {
    /// Defaults: 128 hidden units, 2 blocks, 8 tokens, 2 heads.
    pub fn new(d_in: usize) -> Self {
        SemstConfig {
            d_in,
            d_hidden: 128,
            n_blocks: 2,
            n_tokens: 8,
            n_heads: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_in == 0 {
            return Err(Error::Config("d_in must be positive".into()));
        }
        if self.n_blocks == 0 {
            return Err(Error::Config("at least one residual block is required".into()));
        }
        if self.n_tokens == 0 || self.d_hidden % self.n_tokens != 0 {
            return Err(Error::Config(format!(
                "d_hidden {} is not divisible by n_tokens {}",
                self.d_hidden, self.n_tokens
            )));
        }
        let d_tok = self.d_hidden / self.n_tokens;
        if self.n_heads == 0 || d_tok % self.n_heads != 0 {
            return Err(Error::Config(format!("token width {d_tok} is not divisible by n_heads {}", self.n_heads)));
        }
        Ok(())
    }
}

/// `ReLU(BN(Linear(x)))`.
#[derive(Debug, Clone)]
pub struct FcBlock {
    pub linear: Linear,
    pub bn: BatchNorm,
    relu: Relu,
}

impl FcBlock {
    pub fn new(name: &str, d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        FcBlock {
            linear: Linear::new(&format!("{name}.linear"), d_in, d_out, rng),
            bn: BatchNorm::new(&format!("{name}.bn"), d_out),
            relu: Relu::default(),
        }
    }
}

impl Layer for FcBlock {
    fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        let h = self.linear.forward(x, mode)?;
        let h = self.bn.forward(&h, mode)?;
        self.relu.forward(&h, mode)
    }

    fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let g = self.relu.backward(grad_out)?;
        let g = self.bn.backward(&g)?;
        self.linear.backward(&g)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.linear.params_mut();
        p.extend(self.bn.params_mut());
        p
    }

    fn params(&self) -> Vec<&Param> {
        let mut p = self.linear.params();
        p.extend(self.bn.params());
        p
    }
}

/// `Sigmoid(BN(Linear(x)))`: one threshold per sample and unit, in `(0, 1)`.
#[derive(Debug, Clone)]
pub struct SoftThreshold {
    pub linear: Linear,
    pub bn: BatchNorm,
    sigmoid: Sigmoid,
}

impl SoftThreshold {
    pub fn new(name: &str, d: usize, rng: &mut impl Rng) -> Self {
        SoftThreshold {
            linear: Linear::new(&format!("{name}.linear"), d, d, rng),
            bn: BatchNorm::new(&format!("{name}.bn"), d),
            sigmoid: Sigmoid::default(),
        }
    }
}

impl Layer for SoftThreshold {
    fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        let h = self.linear.forward(x, mode)?;
        let h = self.bn.forward(&h, mode)?;
        self.sigmoid.forward(&h, mode)
    }

    fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let g = self.sigmoid.backward(grad_out)?;
        let g = self.bn.backward(&g)?;
        self.linear.backward(&g)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.linear.params_mut();
        p.extend(self.bn.params_mut());
        p
    }

    fn params(&self) -> Vec<&Param> {
        let mut p = self.linear.params();
        p.extend(self.bn.params());
        p
    }
}

/// Residual block `x + attention(FC(x)) − threshold(FC(x))`; the skip path is
/// the identity.
#[derive(Debug, Clone)]
pub struct SemstBlock {
    pub fc: FcBlock,
    pub attention: MultiHeadSelfAttention,
    pub threshold: SoftThreshold,
}

impl SemstBlock {
    pub fn new(name: &str, d_hidden: usize, n_tokens: usize, n_heads: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(SemstBlock {
            fc: FcBlock::new(&format!("{name}.fc"), d_hidden, d_hidden, rng),
            attention: MultiHeadSelfAttention::new(&format!("{name}.attention"), d_hidden, n_tokens, n_heads, rng)?,
            threshold: SoftThreshold::new(&format!("{name}.threshold"), d_hidden, rng),
        })
    }

    /// The indirect branch `F(x)` on its own.
    pub fn residual(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        let u = self.fc.forward(x, mode)?;
        let a = self.attention.forward(&u, mode)?;
        let s = self.threshold.forward(&u, mode)?;
        a.sub(&s)
    }
}

impl Layer for SemstBlock {
    fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        x.add(&self.residual(x, mode)?)
    }

    fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let mut du = self.attention.backward(grad_out)?;
        du.add_assign(&self.threshold.backward(&grad_out.scale(-1.0))?)?;
        let mut dx = self.fc.backward(&du)?;
        dx.add_assign(grad_out)?;
        Ok(dx)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.fc.params_mut();
        p.extend(self.attention.params_mut());
        p.extend(self.threshold.params_mut());
        p
    }

    fn params(&self) -> Vec<&Param> {
        let mut p = self.fc.params();
        p.extend(self.attention.params());
        p.extend(self.threshold.params());
        p
    }
}

/// Input FC block, timestep embedding, `n_blocks` residual blocks and a final
/// affine projection back to `d_in`.
#[derive(Debug, Clone)]
pub struct SemstNet {
    pub config: SemstConfig,
    pub input: FcBlock,
    pub blocks: Vec<SemstBlock>,
    pub output: Linear,
}

impl SemstNet {
    pub fn new(config: SemstConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let input = FcBlock::new("input", config.d_in, config.d_hidden, rng);
        let blocks = (0..config.n_blocks)
            .map(|i| SemstBlock::new(&format!("blocks.{i}"), config.d_hidden, config.n_tokens, config.n_heads, rng))
            .collect::<Result<Vec<_>>>()?;
        let output = Linear::new("output", config.d_hidden, config.d_in, rng);
        Ok(SemstNet {
            config,
            input,
            blocks,
            output,
        })
    }
}

impl Denoiser for SemstNet {
    fn forward(&mut self, x: &Matrix, t: &[usize], mode: Mode) -> Result<Matrix> {
        if x.cols() != self.config.d_in {
            return Err(Error::shape("semst_forward", self.config.d_in, x.cols()));
        }
        check_timesteps(x, t)?;
        let mut h = self.input.forward(x, mode)?;
        h.add_assign(&timestep_embed_batch(t, self.config.d_hidden))?;
        for block in &mut self.blocks {
            h = block.forward(&h, mode)?;
        }
        let y = self.output.forward(&h, mode)?;
        y.ensure_finite("semst output")?;
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let mut g = self.output.backward(grad_out)?;
        for block in self.blocks.iter_mut().rev() {
            g = block.backward(&g)?;
        }
        self.input.backward(&g)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.input.params_mut();
        for b in &mut self.blocks {
            p.extend(b.params_mut());
        }
        p.extend(self.output.params_mut());
        p
    }

    fn params(&self) -> Vec<&Param> {
        let mut p = self.input.params();
        for b in &self.blocks {
            p.extend(b.params());
        }
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

    fn weighted(r: Matrix) -> impl Fn(&Matrix) -> (f64, Matrix) {
        move |y: &Matrix| (y.hadamard(&r).unwrap().sum(), r.clone())
    }

    fn perturb_bn(bn: &mut BatchNorm, rng: &mut impl Rng) {
        let d = bn.width();
        bn.gamma.value = Matrix::uniform(1, d, 0.5, 1.5, rng);
        bn.beta.value = Matrix::uniform(1, d, -0.5, 0.5, rng);
        bn.running_mean.value = Matrix::uniform(1, d, -0.3, 0.3, rng);
        bn.running_var.value = Matrix::uniform(1, d, 0.5, 2.0, rng);
    }

    #[test]
    fn fc_block_is_nonnegative_and_reduces_to_relu() {
        let mut rng = seeded(1);
        let mut fc = FcBlock::new("fc", 4, 4, &mut rng);
        let x = Matrix::randn(6, 4, &mut rng);
        assert!(fc.forward(&x, Mode::Train).unwrap().data().iter().all(|&v| v >= 0.0));

        let mut fc = FcBlock::new("fc", 4, 4, &mut rng);
        fc.linear = Linear::from_parts("l", Matrix::identity(4), Matrix::zeros(1, 4));
        fc.bn.eps = 0.0;
        let y = fc.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y, crate::nn::relu(&x));
    }

    #[test]
    fn fc_block_gradients() {
        let mut rng = seeded(2);
        let mut fc = FcBlock::new("fc", 8, 8, &mut rng);
        let x = Matrix::randn(4, 8, &mut rng);
        let loss = weighted(Matrix::randn(4, 8, &mut rng));
        for mode in [Mode::Train, Mode::Eval] {
            let report = grad_check(&mut fc, &x, mode, &loss, 5000).unwrap();
            assert!(report.max_rel_error < 1e-4, "{mode:?} {report:?}");
        }
    }

    #[test]
    fn soft_threshold_range_and_zero_linear() {
        let mut rng = seeded(3);
        let mut st = SoftThreshold::new("st", 6, &mut rng);
        let x = Matrix::randn(5, 6, &mut rng).scale(50.0);
        let y = st.forward(&x, Mode::Train).unwrap();
        assert!(y.data().iter().all(|&v| v > 0.0 && v < 1.0));

        let mut fresh = SoftThreshold::new("st", 6, &mut rng);
        fresh.linear = Linear::from_parts("l", Matrix::zeros(6, 6), Matrix::zeros(1, 6));
        let y = fresh.forward(&x, Mode::Eval).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.5));
        let loss = weighted(Matrix::randn(5, 6, &mut rng));
        let mut st = SoftThreshold::new("st", 6, &mut rng);
        let report = grad_check(&mut st, &Matrix::randn(5, 6, &mut rng), Mode::Train, &loss, 5000).unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn soft_threshold_rows_are_independent_in_eval_mode() {
        let mut rng = seeded(4);
        let mut st = SoftThreshold::new("st", 4, &mut rng);
        let x = Matrix::randn(3, 4, &mut rng);
        let all = st.forward(&x, Mode::Eval).unwrap();
        for i in 0..3 {
            let single = st.forward(&x.select_rows(&[i]), Mode::Eval).unwrap();
            assert_eq!(single.row(0), all.row(i));
        }
    }

    #[test]
    fn block_is_identity_plus_residual() {
        let mut rng = seeded(5);
        let mut block = SemstBlock::new("b", 8, 4, 2, &mut rng).unwrap();
        let x = Matrix::randn(4, 8, &mut rng);
        let y = block.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.shape(), x.shape());
        let f = block.residual(&x, Mode::Eval).unwrap();
        for ((yv, xv), fv) in y.data().iter().zip(x.data()).zip(f.data()) {
            assert!((yv - xv - fv).abs() < 1e-12);
        }
    }

    #[test]
    fn block_gradients_eval_and_train() {
        let mut rng = seeded(6);
        let mut block = SemstBlock::new("b", 8, 4, 2, &mut rng).unwrap();
        perturb_bn(&mut block.fc.bn, &mut rng);
        perturb_bn(&mut block.threshold.bn, &mut rng);
        let x = Matrix::randn(4, 8, &mut rng);
        let loss = weighted(Matrix::randn(4, 8, &mut rng));
        for mode in [Mode::Eval, Mode::Train] {
            let report = grad_check(&mut block, &x, mode, &loss, 5000).unwrap();
            assert!(report.max_rel_error < 1e-4, "{mode:?} {report:?}");
        }
    }

    #[test]
    fn network_shape_and_unbounded_output() {
        let mut rng = seeded(7);
        let cfg = SemstConfig {
            d_in: 4,
            d_hidden: 8,
            n_blocks: 2,
            n_tokens: 2,
            n_heads: 2,
        };
        let mut net = SemstNet::new(cfg, &mut rng).unwrap();
        let x = Matrix::randn(5, 4, &mut rng);
        let y = net.forward(&x, &[1, 2, 3, 4, 5], Mode::Train).unwrap();
        assert_eq!(y.shape(), (5, 4));
        net.output.bias.value = Matrix::filled(1, 4, -100.0);
        let y = net.forward(&x, &[1; 5], Mode::Eval).unwrap();
        assert!(y.data().iter().any(|&v| v < 0.0));
        assert!(net.forward(&x, &[1; 4], Mode::Eval).is_err());
        assert!(net.forward(&Matrix::zeros(2, 3), &[1; 2], Mode::Eval).is_err());
    }

    #[test]
    fn invalid_configs() {
        let mut rng = seeded(0);
        let mut cfg = SemstConfig::new(3);
        cfg.n_blocks = 0;
        assert!(SemstNet::new(cfg.clone(), &mut rng).is_err());
        cfg.n_blocks = 1;
        cfg.n_tokens = 7;
        assert!(SemstNet::new(cfg.clone(), &mut rng).is_err());
        cfg.n_tokens = 8;
        cfg.n_heads = 3;
        assert!(SemstNet::new(cfg, &mut rng).is_err());
    }

    #[test]
    fn network_gradients() {
        let mut rng = seeded(8);
        let cfg = SemstConfig {
            d_in: 4,
            d_hidden: 8,
            n_blocks: 1,
            n_tokens: 2,
            n_heads: 2,
        };
        let mut net = SemstNet::new(cfg, &mut rng).unwrap();
        let x = Matrix::randn(4, 4, &mut rng);
        let loss = weighted(Matrix::randn(4, 4, &mut rng));
        for mode in [Mode::Train, Mode::Eval] {
            let mut layer = Conditioned { model: &mut net, t: vec![1, 5, 10, 50] };
            let report = grad_check(&mut layer, &x, mode, &loss, 5000).unwrap();
            assert!(report.max_rel_error < 1e-4, "{mode:?} {report:?}");
        }
    }
}
