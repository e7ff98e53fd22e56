//! Balancing a training split by synthesising minority rows.
//!
//! All methods work in the encoded space of a [`Normalizer`] fitted on the
//! split's minority rows; majority rows are encoded with the same normaliser.

mod interpolate;

pub use interpolate::{adasyn, adasyn_allocation, adasyn_ratios, interpolate, largest_remainder, nearest_neighbours, smote};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataio::{class_stats, Dataset, Normalizer, Row};
use crate::denoisers::{Architecture, MlpConfig, SemstConfig};
use crate::diffusion::sample;
use crate::nn::Matrix;
use crate::rng::{derive_seed, seeded};
use crate::trainer::{train, Checkpoint, TrainConfig, TrainOutcome};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SemresDdpm,
    MlpDdpm,
    Smote,
    Adasyn,
    None,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::SemresDdpm, Method::MlpDdpm, Method::Smote, Method::Adasyn, Method::None];

    pub fn name(self) -> &'static str {
        match self {
            Method::SemresDdpm => "semres_ddpm",
            Method::MlpDdpm => "mlp_ddpm",
            Method::Smote => "smote",
            Method::Adasyn => "adasyn",
            Method::None => "none",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown oversampling method `{s}`")))
    }
}

/// Diffusion training settings shared by both DDPM oversamplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiffusionSettings {
    pub iterations: usize,
    pub timesteps: usize,
    pub lr: f64,
    pub batch_size: Option<usize>,
    /// `d_in` is ignored; it follows the encoded width.
    pub semst: SemstConfig,
    pub mlp: MlpConfig,
}

impl Default for DiffusionSettings {
    fn default() -> Self {
        DiffusionSettings {
            iterations: 20_000,
            timesteps: 1000,
            lr: 1e-3,
            batch_size: None,
            semst: SemstConfig::new(0),
            mlp: MlpConfig::new(0),
        }
    }
}

impl DiffusionSettings {
    /// T = 100 and 3000 iterations with a 64-unit network.
    pub fn desk_scale() -> Self {
        DiffusionSettings {
            iterations: 3000,
            timesteps: 100,
            semst: SemstConfig {
                d_hidden: 64,
                ..SemstConfig::new(0)
            },
            mlp: MlpConfig {
                d_in: 0,
                hidden_widths: vec![128, 128],
            },
            ..DiffusionSettings::default()
        }
    }

    pub fn train_config(&self, method: Method, seed: u64) -> Result<TrainConfig> {
        let architecture = match method {
            Method::SemresDdpm => Architecture::Semst(self.semst.clone()),
            Method::MlpDdpm => Architecture::Mlp(self.mlp.clone()),
            other => return Err(Error::Config(format!("{other} does not train a denoiser"))),
        };
        Ok(TrainConfig {
            iterations: self.iterations,
            timesteps: self.timesteps,
            lr: self.lr,
            batch_size: self.batch_size,
            seed,
            architecture,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OversampleConfig {
    /// Neighbourhood size for SMOTE and ADASYN.
    pub k: usize,
    pub diffusion: DiffusionSettings,
}

impl Default for OversampleConfig {
    fn default() -> Self {
        OversampleConfig {
            k: 5,
            diffusion: DiffusionSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OversampleRequest<'a> {
    pub train: &'a Dataset,
    pub method: Method,
    pub config: &'a OversampleConfig,
    pub seed: u64,
}

/// Encoded training rows followed by the synthetic minority rows.
#[derive(Debug, Clone)]
pub struct BalancedTrainSet {
    pub features: Matrix,
    pub labels: Vec<bool>,
    pub synthetic: Vec<bool>,
    pub normalizer: Normalizer,
    /// Synthetic rows decoded back to schema values.
    pub synthetic_rows: Vec<Row>,
    /// Present for the diffusion methods.
    pub training: Option<TrainOutcome>,
}

impl BalancedTrainSet {
    pub fn synthetic_count(&self) -> usize {
        self.synthetic.iter().filter(|&&s| s).count()
    }

    /// `(positives, negatives)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l).count();
        (pos, self.labels.len() - pos)
    }
}

/// Trains a denoiser on the encoded minority rows and draws `count` rows from
/// it, clamped to `[0, 1]`.
pub fn ddpm_generate(minority: &Matrix, count: usize, config: &TrainConfig, sample_seed: u64) -> Result<(Matrix, TrainOutcome)> {
    let outcome = train(minority, config)?;
    if count == 0 {
        return Ok((Matrix::zeros(0, minority.cols()), outcome));
    }
    let mut net = outcome.checkpoint.network()?;
    let schedule = outcome.checkpoint.schedule()?;
    let raw = sample(&mut net, count, minority.cols(), &schedule, &mut seeded(sample_seed))?;
    Ok((raw.clamp(0.0, 1.0), outcome))
}

/// Balances the split so that minority count equals majority count.
pub fn balance(request: &OversampleRequest) -> Result<BalancedTrainSet> {
    let ds = request.train;
    let (n_min, n_maj, _) = class_stats(ds);
    let minority_rows = ds.minority_rows();
    let normalizer = Normalizer::fit(&minority_rows, &ds.schema)?;
    let features = normalizer.encode(&ds.rows)?.values;
    let count = n_maj - n_min;

    let mut training = None;
    let synth = match request.method {
        Method::None => Matrix::zeros(0, features.cols()),
        _ if count == 0 => Matrix::zeros(0, features.cols()),
        Method::Smote => {
            let minority = normalizer.encode(&minority_rows)?.values;
            smote(&minority, request.config.k, count, &mut seeded(derive_seed(request.seed, &[3])))?
        }
        Method::Adasyn => adasyn(&features, &ds.labels, request.config.k, count, &mut seeded(derive_seed(request.seed, &[4])))?,
        method @ (Method::SemresDdpm | Method::MlpDdpm) => {
            if n_min < 2 {
                return Err(Error::Dataset(format!("diffusion oversampling needs at least 2 minority rows, got {n_min}")));
            }
            let minority = normalizer.encode(&minority_rows)?.values;
            let config = request.config.diffusion.train_config(method, derive_seed(request.seed, &[5]))?;
            let (raw, outcome) = ddpm_generate(&minority, count, &config, derive_seed(request.seed, &[6]))?;
            training = Some(outcome);
            // Re-encoding turns soft one-hot outputs into crisp categories.
            normalizer.encode(&normalizer.decode(&raw)?)?.values
        }
    };

    let synthetic_rows = if synth.rows() == 0 { Vec::new() } else { normalizer.decode(&synth)? };
    let n = features.rows();
    let features = if synth.rows() == 0 { features } else { features.vstack(&synth)? };
    let mut labels = ds.labels.clone();
    labels.extend(std::iter::repeat_n(true, synth.rows()));
    let mut synthetic = vec![false; n];
    synthetic.extend(std::iter::repeat_n(true, synth.rows()));
    Ok(BalancedTrainSet {
        features,
        labels,
        synthetic,
        normalizer,
        synthetic_rows,
        training,
    })
}

impl Checkpoint {
    /// Decodes generated rows with the attached normaliser.
    pub fn decode(&self, encoded: &Matrix) -> Result<Vec<Row>> {
        match &self.meta.normalizer {
            Some(n) => n.decode(&encoded.clamp(0.0, 1.0)),
            None => Err(Error::Config("checkpoint has no normalizer attached".into())),
        }
    }
}
