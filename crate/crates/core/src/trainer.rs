//! Denoiser training on an encoded minority matrix, plus a portable
//! checkpoint format (`meta.json` + `weights.bin`).

use std::fs;
use std::path::Path;

use log::warn;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::Normalizer;
use crate::denoisers::{Architecture, Denoiser, Network, SemstConfig};
use crate::diffusion::{scaled_schedule, simple_loss_backward, NoiseSchedule, DEFAULT_TIMESTEPS};
use crate::nn::{Adam, AdamConfig, Matrix};
use crate::rng::seeded;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "semres-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const EMA_FACTOR: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub timesteps: usize,
    pub lr: f64,
    /// `None` means `min(64, n)`.
    pub batch_size: Option<usize>,
    pub seed: u64,
    /// `d_in` is overwritten with the width of the training matrix.
    pub architecture: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 20_000,
            timesteps: DEFAULT_TIMESTEPS,
            lr: 1e-3,
            batch_size: None,
            seed: 0,
            architecture: Architecture::Semst(SemstConfig::new(1)),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.timesteps == 0 {
            return Err(Error::Config("timesteps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format: String,
    pub version: u32,
    pub architecture: Architecture,
    pub schedule: NoiseSchedule,
    pub normalizer: Option<Normalizer>,
    pub schema_fingerprint: Option<String>,
    pub seed: u64,
    pub iterations: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub final_loss: f64,
    pub parameters: Vec<ParamEntry>,
    pub parameter_count: usize,
}

/// A trained denoiser: metadata plus every parameter and normalisation
/// buffer, flattened in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub losses: Vec<f64>,
    /// Exponential moving average of `losses` with factor [`EMA_FACTOR`].
    pub smoothed: Vec<f64>,
    pub optimizer_steps: u64,
}

/// Exponential moving average seeded with the first value.
pub fn smooth(losses: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(losses.len());
    let mut acc = None;
    for &l in losses {
        let next = match acc {
            None => l,
            Some(a) => EMA_FACTOR * a + (1.0 - EMA_FACTOR) * l,
        };
        acc = Some(next);
        out.push(next);
    }
    out
}

pub fn train(data: &Matrix, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let (n, d) = data.shape();
    if n < 2 {
        return Err(Error::Dataset(format!("need at least 2 training rows, got {n}")));
    }
    if data.data().iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
        return Err(Error::Dataset("training matrix must lie in [0, 1]".into()));
    }
    let batch = config.batch_size.unwrap_or(n.min(64));
    let replace = batch > n;
    if replace {
        warn!("batch size {batch} exceeds {n} training rows; sampling with replacement");
    }

    let schedule = scaled_schedule(config.timesteps)?;
    let architecture = config.architecture.with_d_in(d);
    let mut net = architecture.build(config.seed)?;
    let mut adam = Adam::new(AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    })?;
    let mut rng = seeded(crate::rng::derive_seed(config.seed, &[1]));

    let mut losses = Vec::with_capacity(config.iterations);
    for iteration in 0..config.iterations {
        let rows: Vec<usize> = if replace {
            (0..batch).map(|_| rng.random_range(0..n)).collect()
        } else {
            index::sample(&mut rng, n, batch).into_vec()
        };
        let s0 = data.select_rows(&rows);
        let t: Vec<usize> = (0..batch).map(|_| rng.random_range(1..=schedule.timesteps)).collect();
        let eps = Matrix::randn(batch, d, &mut rng);

        net.zero_grad();
        let loss = match simple_loss_backward(&mut net, &s0, &t, &eps, &schedule) {
            Ok(l) => l,
            Err(Error::NonFinite(_)) => return Err(Error::Diverged { iteration, loss: f64::NAN }),
            Err(e) => return Err(e),
        };
        let mut params = net.params_mut();
        match adam.step(&mut params) {
            Ok(()) => {}
            Err(Error::NonFinite(_)) => return Err(Error::Diverged { iteration, loss }),
            Err(e) => return Err(e),
        }
        losses.push(loss);
    }

    let smoothed = smooth(&losses);
    let meta = CheckpointMeta {
        format: CHECKPOINT_FORMAT.to_string(),
        version: CHECKPOINT_VERSION,
        architecture,
        schedule,
        normalizer: None,
        schema_fingerprint: None,
        seed: config.seed,
        iterations: config.iterations,
        lr: config.lr,
        batch_size: batch,
        final_loss: *smoothed.last().expect("at least one iteration"),
        parameters: Vec::new(),
        parameter_count: 0,
    };
    Ok(TrainOutcome {
        checkpoint: Checkpoint::capture(meta, &net),
        losses,
        smoothed,
        optimizer_steps: adam.step_count(),
    })
}

impl Checkpoint {
    fn capture(mut meta: CheckpointMeta, net: &Network) -> Checkpoint {
        let mut weights = Vec::new();
        meta.parameters = net
            .params()
            .into_iter()
            .map(|p| {
                weights.extend_from_slice(p.value.data());
                ParamEntry {
                    name: p.name.clone(),
                    shape: [p.value.rows(), p.value.cols()],
                }
            })
            .collect();
        meta.parameter_count = weights.len();
        Checkpoint { meta, weights }
    }

    /// Attaches the normaliser used to encode the training rows.
    pub fn with_normalizer(mut self, normalizer: Normalizer) -> Checkpoint {
        self.meta.schema_fingerprint = Some(normalizer.schema.fingerprint());
        self.meta.normalizer = Some(normalizer);
        self
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        self.meta.schedule.rebuild()
    }

    /// Rebuilds the network and loads the stored weights into it.
    pub fn network(&self) -> Result<Network> {
        let mut net = self.meta.architecture.build(self.meta.seed)?;
        let mut params = net.params_mut();
        if params.len() != self.meta.parameters.len() {
            return Err(Error::Format(format!(
                "architecture has {} tensors, manifest lists {}",
                params.len(),
                self.meta.parameters.len()
            )));
        }
        let expected: usize = params.iter().map(|p| p.value.len()).sum();
        if expected != self.weights.len() {
            return Err(Error::ParameterCount {
                declared: expected,
                found: self.weights.len(),
            });
        }
        let mut offset = 0;
        for (p, entry) in params.iter_mut().zip(&self.meta.parameters) {
            if p.name != entry.name || [p.value.rows(), p.value.cols()] != entry.shape {
                return Err(Error::Format(format!("manifest entry {} does not match tensor {}", entry.name, p.name)));
            }
            let len = p.value.len();
            p.value.data_mut().copy_from_slice(&self.weights[offset..offset + len]);
            offset += len;
        }
        Ok(net)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta_path = dir.join("meta.json");
        fs::write(&meta_path, serde_json::to_vec_pretty(&self.meta)?).map_err(|e| Error::io(&meta_path, e))?;
        let bytes: Vec<u8> = self.weights.iter().flat_map(|w| w.to_le_bytes()).collect();
        let weights_path = dir.join("weights.bin");
        fs::write(&weights_path, bytes).map_err(|e| Error::io(&weights_path, e))
    }

    pub fn load(dir: &Path) -> Result<Checkpoint> {
        let meta_path = dir.join("meta.json");
        let text = fs::read(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: CheckpointMeta = serde_json::from_slice(&text).map_err(|e| Error::Format(format!("meta.json: {e}")))?;
        if meta.format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!("unknown format tag {:?}", meta.format)));
        }
        if meta.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported version {}", meta.version)));
        }
        let weights_path = dir.join("weights.bin");
        let bytes = fs::read(&weights_path).map_err(|e| Error::io(&weights_path, e))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Truncated(bytes.len()));
        }
        let weights: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let manifest: usize = meta.parameters.iter().map(|p| p.shape[0] * p.shape[1]).sum();
        if manifest != meta.parameter_count {
            return Err(Error::Format(format!(
                "manifest shapes total {manifest} values but parameter_count is {}",
                meta.parameter_count
            )));
        }
        if weights.len() != meta.parameter_count {
            return Err(Error::ParameterCount {
                declared: meta.parameter_count,
                found: weights.len(),
            });
        }
        let mut meta = meta;
        meta.schedule = meta.schedule.rebuild()?;
        Ok(Checkpoint { meta, weights })
    }
}
