//! Binary classifiers with a shared fit/score/predict interface. Scores are
//! positive-class probabilities (or frequencies) in `[0, 1]`.

mod bayes;
mod knn;
mod logistic;
mod tree;

pub use bayes::{BernoulliNb, GaussianNb};
pub use knn::Knn;
pub use logistic::LogisticRegression;
pub use tree::{DecisionTree, Node};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::nn::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierKind {
    GaussianNb { var_smoothing: f64 },
    BernoulliNb { binarize: f64, alpha: f64 },
    Knn { k: usize },
    LogisticRegression { lr: f64, iterations: usize, l2: f64 },
    DecisionTree { max_depth: usize, min_split: usize },
}

impl ClassifierKind {
    pub const NAMES: [&'static str; 5] = ["gaussian_nb", "bernoulli_nb", "knn", "logreg", "decision_tree"];

    pub fn gaussian_nb() -> Self {
        ClassifierKind::GaussianNb { var_smoothing: 1e-9 }
    }

    pub fn bernoulli_nb() -> Self {
        ClassifierKind::BernoulliNb { binarize: 0.5, alpha: 1.0 }
    }

    pub fn knn() -> Self {
        ClassifierKind::Knn { k: 5 }
    }

    pub fn logistic_regression() -> Self {
        ClassifierKind::LogisticRegression {
            lr: 0.1,
            iterations: 500,
            l2: 1e-4,
        }
    }

    pub fn decision_tree() -> Self {
        ClassifierKind::DecisionTree { max_depth: 10, min_split: 2 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierKind::GaussianNb { .. } => "gaussian_nb",
            ClassifierKind::BernoulliNb { .. } => "bernoulli_nb",
            ClassifierKind::Knn { .. } => "knn",
            ClassifierKind::LogisticRegression { .. } => "logreg",
            ClassifierKind::DecisionTree { .. } => "decision_tree",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ClassifierKind::GaussianNb { var_smoothing } => var_smoothing >= 0.0,
            ClassifierKind::BernoulliNb { alpha, .. } => alpha > 0.0,
            ClassifierKind::Knn { k } => k > 0,
            ClassifierKind::LogisticRegression { lr, iterations, l2 } => lr > 0.0 && iterations > 0 && l2 >= 0.0,
            ClassifierKind::DecisionTree { max_depth, min_split } => max_depth > 0 && min_split >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid hyperparameters for {self:?}")))
        }
    }

    pub fn fit(&self, x: &Matrix, y: &[bool]) -> Result<Classifier> {
        self.validate()?;
        check_training_set(x, y)?;
        Ok(match *self {
            ClassifierKind::GaussianNb { var_smoothing } => Classifier::GaussianNb(GaussianNb::fit(x, y, var_smoothing)),
            ClassifierKind::BernoulliNb { binarize, alpha } => Classifier::BernoulliNb(BernoulliNb::fit(x, y, binarize, alpha)),
            ClassifierKind::Knn { k } => Classifier::Knn(Knn::fit(x, y, k)),
            ClassifierKind::LogisticRegression { lr, iterations, l2 } => {
                Classifier::LogisticRegression(LogisticRegression::fit(x, y, lr, iterations, l2))
            }
            ClassifierKind::DecisionTree { max_depth, min_split } => {
                Classifier::DecisionTree(DecisionTree::fit(x, y, max_depth, min_split))
            }
        })
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a kind name into its default hyperparameters. `logistic_regression`
/// is accepted as an alias of `logreg`.
impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_nb" => Ok(ClassifierKind::gaussian_nb()),
            "bernoulli_nb" => Ok(ClassifierKind::bernoulli_nb()),
            "knn" => Ok(ClassifierKind::knn()),
            "logreg" | "logistic_regression" => Ok(ClassifierKind::logistic_regression()),
            "decision_tree" | "tree" => Ok(ClassifierKind::decision_tree()),
            other => Err(Error::Config(format!("unknown classifier `{other}`"))),
        }
    }
}

fn check_training_set(x: &Matrix, y: &[bool]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::shape("classifier fit", x.rows(), y.len()));
    }
    if x.rows() < 2 {
        return Err(Error::Dataset("need at least 2 training rows".into()));
    }
    if y.iter().all(|&l| l) || y.iter().all(|&l| !l) {
        return Err(Error::Dataset("training labels contain a single class".into()));
    }
    x.ensure_finite("classifier training matrix")
}

/// A fitted model.
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    GaussianNb(GaussianNb),
    BernoulliNb(BernoulliNb),
    Knn(Knn),
    LogisticRegression(LogisticRegression),
    DecisionTree(DecisionTree),
}

impl Classifier {
    pub fn width(&self) -> usize {
        match self {
            Classifier::GaussianNb(m) => m.width(),
            Classifier::BernoulliNb(m) => m.width(),
            Classifier::Knn(m) => m.width(),
            Classifier::LogisticRegression(m) => m.weights.len(),
            Classifier::DecisionTree(m) => m.width,
        }
    }

    /// Positive-class scores, one per row.
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.width() {
            return Err(Error::shape("classifier score", self.width(), x.cols()));
        }
        Ok((0..x.rows())
            .map(|i| {
                let row = x.row(i);
                match self {
                    Classifier::GaussianNb(m) => m.score_row(row),
                    Classifier::BernoulliNb(m) => m.score_row(row),
                    Classifier::Knn(m) => m.score_row(row),
                    Classifier::LogisticRegression(m) => m.score_row(row),
                    Classifier::DecisionTree(m) => m.score_row(row),
                }
            })
            .collect())
    }

    /// `score ≥ threshold`.
    pub fn predict(&self, x: &Matrix, threshold: f64) -> Result<Vec<bool>> {
        Ok(self.score(x)?.into_iter().map(|s| s >= threshold).collect())
    }
}
