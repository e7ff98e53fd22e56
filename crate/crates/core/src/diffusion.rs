//! Linear-β DDPM: forward noising, the noise-prediction loss and ancestral
//! sampling. Timesteps are 1-based throughout (`t ∈ 1..=T`).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::denoisers::Denoiser;
use crate::nn::{Matrix, Mode};
use crate::{Error, Result};

pub const DEFAULT_TIMESTEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub timesteps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    #[serde(skip)]
    tables: Tables,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Tables {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
    beta_tilde: Vec<f64>,
}

/// β linear from `beta_start` to `beta_end` over `timesteps` steps.
pub fn linear_schedule(timesteps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if timesteps == 0 {
        return Err(Error::Config("the schedule needs at least one timestep".into()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::Config(format!(
            "need 0 < beta_start <= beta_end < 1, got {beta_start} and {beta_end}"
        )));
    }
    let beta: Vec<f64> = if timesteps == 1 {
        vec![beta_start]
    } else {
        let step = (beta_end - beta_start) / (timesteps - 1) as f64;
        (0..timesteps).map(|i| beta_start + step * i as f64).collect()
    };
    let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bar = Vec::with_capacity(timesteps);
    let mut acc = 1.0;
    for a in &alpha {
        acc *= a;
        alpha_bar.push(acc);
    }
    let beta_tilde = (0..timesteps)
        .map(|i| {
            let prev = if i == 0 { 1.0 } else { alpha_bar[i - 1] };
            beta[i] * (1.0 - prev) / (1.0 - alpha_bar[i])
        })
        .collect();
    Ok(NoiseSchedule {
        timesteps,
        beta_start,
        beta_end,
        tables: Tables {
            beta,
            alpha,
            alpha_bar,
            beta_tilde,
        },
    })
}

/// The 1e−4 → 0.02 profile stretched so that `timesteps · β` keeps the same
/// total as at T = 1000; shorter chains still end near pure noise.
pub fn scaled_schedule(timesteps: usize) -> Result<NoiseSchedule> {
    let scale = DEFAULT_TIMESTEPS as f64 / timesteps.max(1) as f64;
    let end = (DEFAULT_BETA_END * scale).min(0.999);
    let start = (DEFAULT_BETA_START * scale).min(end);
    linear_schedule(timesteps, start, end)
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        linear_schedule(DEFAULT_TIMESTEPS, DEFAULT_BETA_START, DEFAULT_BETA_END).expect("default schedule is valid")
    }
}

impl NoiseSchedule {
    /// Recomputes the tables after deserialisation.
    pub fn rebuild(&self) -> Result<NoiseSchedule> {
        linear_schedule(self.timesteps, self.beta_start, self.beta_end)
    }

    fn ensure_tables(&self) -> Result<()> {
        if self.tables.beta.len() != self.timesteps {
            return Err(Error::Config("noise schedule tables are missing; call rebuild()".into()));
        }
        Ok(())
    }

    fn index(&self, t: usize) -> Result<usize> {
        self.ensure_tables()?;
        if t == 0 || t > self.timesteps {
            return Err(Error::Config(format!("timestep {t} outside 1..={}", self.timesteps)));
        }
        Ok(t - 1)
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.tables.beta[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.tables.alpha[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.tables.alpha_bar[t - 1]
    }

    pub fn beta_tilde(&self, t: usize) -> f64 {
        self.tables.beta_tilde[t - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.tables.beta
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.tables.alpha_bar
    }
}

/// `S_t = √ᾱ_t · S_0 + √(1 − ᾱ_t) · eps` with one timestep per row.
pub fn q_sample_rows(s0: &Matrix, t: &[usize], eps: &Matrix, schedule: &NoiseSchedule) -> Result<Matrix> {
    if s0.shape() != eps.shape() {
        return Err(Error::shape("q_sample", format!("{:?}", s0.shape()), format!("{:?}", eps.shape())));
    }
    if t.len() != s0.rows() {
        return Err(Error::shape("q_sample timesteps", s0.rows(), t.len()));
    }
    s0.ensure_finite("q_sample input")?;
    let mut out = Matrix::zeros(s0.rows(), s0.cols());
    for (i, &ti) in t.iter().enumerate() {
        let ab = schedule.tables.alpha_bar[schedule.index(ti)?];
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        for ((o, x), e) in out.row_mut(i).iter_mut().zip(s0.row(i)).zip(eps.row(i)) {
            *o = a * x + b * e;
        }
    }
    Ok(out)
}

/// [`q_sample_rows`] with the same timestep for every row.
pub fn q_sample(s0: &Matrix, t: usize, eps: &Matrix, schedule: &NoiseSchedule) -> Result<Matrix> {
    q_sample_rows(s0, &vec![t; s0.rows()], eps, schedule)
}

fn squared_error(pred: &Matrix, eps: &Matrix) -> Result<f64> {
    if pred.shape() != eps.shape() {
        return Err(Error::shape("simple_loss", format!("{:?}", eps.shape()), format!("{:?}", pred.shape())));
    }
    let loss = pred.data().iter().zip(eps.data()).map(|(p, e)| (p - e) * (p - e)).sum::<f64>() / pred.len() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("diffusion loss".into()));
    }
    Ok(loss)
}

/// Mean over rows and coordinates of `(eps − z(q_sample(S_0, t, eps), t))²`.
pub fn simple_loss<D: Denoiser + ?Sized>(
    denoiser: &mut D,
    s0: &Matrix,
    t: &[usize],
    eps: &Matrix,
    schedule: &NoiseSchedule,
    mode: Mode,
) -> Result<f64> {
    let st = q_sample_rows(s0, t, eps, schedule)?;
    let pred = denoiser.forward(&st, t, mode)?;
    squared_error(&pred, eps)
}

/// Training-mode [`simple_loss`] that also accumulates parameter gradients.
pub fn simple_loss_backward<D: Denoiser + ?Sized>(
    denoiser: &mut D,
    s0: &Matrix,
    t: &[usize],
    eps: &Matrix,
    schedule: &NoiseSchedule,
) -> Result<f64> {
    let st = q_sample_rows(s0, t, eps, schedule)?;
    let pred = denoiser.forward(&st, t, Mode::Train)?;
    let loss = squared_error(&pred, eps)?;
    let grad = pred.sub(eps)?.scale(2.0 / pred.len() as f64);
    denoiser.backward(&grad)?;
    Ok(loss)
}

/// One ancestral step `S_t → S_{t−1}`; deterministic at `t = 1`.
pub fn p_sample_step<D: Denoiser + ?Sized>(
    denoiser: &mut D,
    st: &Matrix,
    t: usize,
    schedule: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<Matrix> {
    let i = schedule.index(t)?;
    let z = denoiser.forward(st, &vec![t; st.rows()], Mode::Eval)?;
    let tab = &schedule.tables;
    let coef = tab.beta[i] / (1.0 - tab.alpha_bar[i]).sqrt();
    let inv = 1.0 / tab.alpha[i].sqrt();
    let sigma = tab.beta_tilde[i].sqrt();
    let mut out = st.zip_map(&z, |s, z| inv * (s - coef * z))?;
    if sigma > 0.0 {
        for v in out.data_mut() {
            let xi: f64 = rng.sample(StandardNormal);
            *v += sigma * xi;
        }
    }
    Ok(out)
}

/// Runs the full reverse chain from `S_T ~ N(0, I)` down to `S_0`.
pub fn sample<D: Denoiser + ?Sized>(
    denoiser: &mut D,
    n: usize,
    d: usize,
    schedule: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::Config("cannot sample zero rows".into()));
    }
    schedule.ensure_tables()?;
    let start = Matrix::randn(n, d, rng);
    denoise_from(denoiser, start, schedule.timesteps, schedule, rng)
}

/// Applies the reverse steps `t_start, …, 1` to `s`; `t_start = 0` returns
/// `s` unchanged.
pub fn denoise_from<D: Denoiser + ?Sized>(
    denoiser: &mut D,
    mut s: Matrix,
    t_start: usize,
    schedule: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<Matrix> {
    if t_start > schedule.timesteps {
        return Err(Error::Config(format!("start step {t_start} exceeds T = {}", schedule.timesteps)));
    }
    for t in (1..=t_start).rev() {
        s = match p_sample_step(denoiser, &s, t, schedule, rng) {
            Ok(next) => next,
            Err(Error::NonFinite(_)) => return Err(Error::SamplingDiverged(t)),
            Err(e) => return Err(e),
        };
        if s.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::SamplingDiverged(t));
        }
    }
    Ok(s)
}
