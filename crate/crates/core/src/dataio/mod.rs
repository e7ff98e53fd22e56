//! Tabular data ingestion and the numeric representation the generators see.
//!
//! Raw rows carry numeric and categorical values. [`fit_encode`] expands each
//! categorical feature into one-hot columns and min-max scales numeric ones so
//! every training entry lands in `[0, 1]`; [`decode`] inverts that mapping for
//! arbitrary (generated) matrices by clamping and arg-maxing.

mod csv_format;
mod encode;
mod folds;
mod keel;

pub use csv_format::{parse_csv, write_rows_csv};
pub use encode::{decode, encode_with, fit_encode, ColumnOrigin, EncodedMatrix, Normalizer};
pub use folds::{stratified_kfold, FoldPlan};
pub use keel::parse_keel;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Numeric,
        }
    }

    pub fn categorical(name: impl Into<String>, categories: Vec<String>) -> Result<Self> {
        let name = name.into();
        if categories.len() < 2 {
            return Err(Error::Dataset(format!(
                "categorical feature `{name}` needs at least two categories"
            )));
        }
        Ok(FeatureSpec {
            name,
            kind: FeatureKind::Categorical { categories },
        })
    }

    /// Number of encoded columns this feature expands to.
    pub fn width(&self) -> usize {
        match &self.kind {
            FeatureKind::Numeric => 1,
            FeatureKind::Categorical { categories } => categories.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Num(f64),
    /// Index into the feature's category list.
    Cat(usize),
}

impl Value {
    pub fn as_num(self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(v),
            Value::Cat(_) => None,
        }
    }
}

pub type Row = Vec<Value>;

/// Ordered feature list. Cheap to clone; shared between the dataset, the
/// normalizer and checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<FeatureSpec>,
}

impl Schema {
    pub fn new(features: Vec<FeatureSpec>) -> Self {
        Schema { features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn encoded_width(&self) -> usize {
        self.features.iter().map(FeatureSpec::width).sum()
    }

    /// Stable hex digest of feature names and kinds.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for f in &self.features {
            hasher.update(f.name.as_bytes());
            hasher.update([0u8]);
            match &f.kind {
                FeatureKind::Numeric => hasher.update(b"numeric"),
                FeatureKind::Categorical { categories } => {
                    hasher.update(b"categorical");
                    for c in categories {
                        hasher.update([0u8]);
                        hasher.update(c.as_bytes());
                    }
                }
            }
            hasher.update([1u8]);
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Checks arity and categorical index bounds of a row.
    pub fn validate_row(&self, row: &[Value]) -> Result<()> {
        if row.len() != self.len() {
            return Err(Error::Dataset(format!(
                "row has {} values, schema has {} features",
                row.len(),
                self.len()
            )));
        }
        for (value, spec) in row.iter().zip(&self.features) {
            match (value, &spec.kind) {
                (Value::Num(v), FeatureKind::Numeric) if v.is_finite() => {}
                (Value::Cat(c), FeatureKind::Categorical { categories }) if *c < categories.len() => {}
                _ => {
                    return Err(Error::Dataset(format!(
                        "value {value:?} does not fit feature `{}`",
                        spec.name
                    )))
                }
            }
        }
        Ok(())
    }
}

/// A binary-labelled table. `labels[i]` is `true` when row `i` belongs to the
/// positive (minority) class.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub schema: Schema,
    pub rows: Vec<Row>,
    pub labels: Vec<bool>,
    pub positive_label: String,
    pub negative_label: String,
}

impl Dataset {
    /// Validates the dataset invariants: arity, both classes present, and the
    /// positive class not being the larger one.
    pub fn new(
        name: impl Into<String>,
        schema: Schema,
        rows: Vec<Row>,
        labels: Vec<bool>,
        positive_label: impl Into<String>,
        negative_label: impl Into<String>,
    ) -> Result<Self> {
        let ds = Dataset {
            name: name.into(),
            schema,
            rows,
            labels,
            positive_label: positive_label.into(),
            negative_label: negative_label.into(),
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        if self.rows.len() != self.labels.len() {
            return Err(Error::Dataset(format!(
                "{} rows but {} labels",
                self.rows.len(),
                self.labels.len()
            )));
        }
        for row in &self.rows {
            self.schema.validate_row(row)?;
        }
        let (n_min, n_maj, _) = class_stats(self);
        if n_min == 0 || n_maj == 0 {
            return Err(Error::Dataset("both class labels must be present".into()));
        }
        if n_min > n_maj {
            return Err(Error::Dataset(format!(
                "positive class `{}` ({n_min}) is larger than negative class ({n_maj})",
                self.positive_label
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn minority_rows(&self) -> Vec<Row> {
        self.rows_where(true)
    }

    pub fn majority_rows(&self) -> Vec<Row> {
        self.rows_where(false)
    }

    fn rows_where(&self, positive: bool) -> Vec<Row> {
        self.rows
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == positive)
            .map(|(r, _)| r.clone())
            .collect()
    }

    /// Sub-dataset with the given row indices, keeping schema and labels.
    /// Does not re-validate class presence.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            positive_label: self.positive_label.clone(),
            negative_label: self.negative_label.clone(),
        }
    }
}

/// `(n_min, n_maj, n_maj / n_min)`.
pub fn class_stats(dataset: &Dataset) -> (usize, usize, f64) {
    let n_min = dataset.labels.iter().filter(|&&l| l).count();
    let n_maj = dataset.labels.len() - n_min;
    let ratio = if n_min == 0 {
        f64::INFINITY
    } else {
        n_maj as f64 / n_min as f64
    };
    (n_min, n_maj, ratio)
}

/// Picks the positive (minority) label from per-label counts given in
/// declaration order; ties go to the label declared first.
pub(crate) fn pick_minority(counts: &[(String, usize)]) -> Result<(String, String)> {
    let present: Vec<&(String, usize)> = counts.iter().filter(|(_, c)| *c > 0).collect();
    match present.len() {
        2 => {
            let (a, b) = (present[0], present[1]);
            if b.1 < a.1 {
                Ok((b.0.clone(), a.0.clone()))
            } else {
                Ok((a.0.clone(), b.0.clone()))
            }
        }
        n if n < 2 => Err(Error::Dataset("both class labels must be present".into())),
        n => Err(Error::Dataset(format!(
            "{n} classes found; only binary problems are supported"
        ))),
    }
}
