//! Diffusion-based oversampling for imbalanced tabular data.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataio`]: KEEL/CSV parsing, one-hot plus min-max encoding, stratified folds.
//! - [`nn`]: a small dense-matrix substrate with exact backpropagation and Adam.
//! - [`denoisers`]: the residual attention/soft-threshold noise predictor and an MLP baseline.
//! - [`diffusion`]: noise schedule, forward noising, training loss and ancestral sampling.
//! - [`trainer`]: the training loop and portable checkpoints.
//! - [`oversample`]: diffusion, SMOTE and ADASYN oversamplers behind one balancing entry point.
//! - [`classifiers`]: five lightweight binary classifiers with a shared fit/score interface.
//! - [`metrics`]: F1, G-mean, AUC, PSNR, Pearson, Friedman and Nemenyi statistics.
//! - [`harness`]: experiment orchestration used by the `semres` command-line tool.

pub mod classifiers;
pub mod dataio;
pub mod denoisers;
pub mod diffusion;
mod error;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod oversample;
pub mod rng;
pub mod surrogate;
pub mod trainer;

pub use error::{Error, Result};
