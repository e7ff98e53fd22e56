use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::ClassifierKind;
use crate::oversample::{DiffusionSettings, Method, OversampleConfig};
use crate::{Error, Result};

/// Everything needed to reproduce an experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// File paths or benchmark names.
    pub datasets: Vec<String>,
    /// Directory searched for `<name>.dat` before falling back to surrogates.
    pub keel_dir: Option<PathBuf>,
    pub methods: Vec<Method>,
    /// Classifier names, e.g. `knn`, `logreg`.
    pub classifiers: Vec<String>,
    pub folds: usize,
    pub seed: u64,
    pub oversample: OversampleConfig,
    /// Decision threshold on classifier scores.
    pub threshold: f64,
    /// Run work units on the rayon pool; results are identical either way.
    pub parallel: bool,
    /// First noising step of the denoising benchmark; `None` means `T`.
    pub bench_start_step: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            datasets: Vec::new(),
            keel_dir: None,
            methods: Method::ALL.to_vec(),
            classifiers: ClassifierKind::NAMES.iter().map(|s| s.to_string()).collect(),
            folds: 10,
            seed: 0,
            oversample: OversampleConfig::default(),
            threshold: 0.5,
            parallel: true,
            bench_start_step: None,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Default protocol with the reduced diffusion budget.
    pub fn desk_scale() -> Self {
        ExperimentConfig {
            oversample: OversampleConfig {
                diffusion: DiffusionSettings::desk_scale(),
                ..OversampleConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn classifier_kinds(&self) -> Result<Vec<ClassifierKind>> {
        self.classifiers.iter().map(|c| c.parse()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Config("at least one dataset is required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.classifiers.is_empty() {
            return Err(Error::Config("at least one classifier is required".into()));
        }
        self.classifier_kinds()?;
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold must lie in [0, 1], got {}", self.threshold)));
        }
        Ok(())
    }
}
