use serde::{Deserialize, Serialize};

use super::{FeatureKind, Row, Schema, Value};
use crate::nn::Matrix;
use crate::{Error, Result};

/// Where an encoded column comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnOrigin {
    pub feature: usize,
    /// Category index for one-hot columns, `None` for numeric columns.
    pub category: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub values: Matrix,
    pub column_map: Vec<ColumnOrigin>,
}

/// Fitted per-feature transform state. Numeric features keep their fitted
/// `(min, max)`; categorical features keep their category order via the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub schema: Schema,
    /// `Some((min, max))` for numeric features, `None` for categorical ones.
    pub ranges: Vec<Option<(f64, f64)>>,
}

impl Normalizer {
    pub fn fit(rows: &[Row], schema: &Schema) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Dataset("cannot fit a normalizer on zero rows".into()));
        }
        let mut ranges = Vec::with_capacity(schema.len());
        for (j, spec) in schema.features.iter().enumerate() {
            match spec.kind {
                FeatureKind::Numeric => {
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for row in rows {
                        let v = value_at(row, j, schema)?
                            .as_num()
                            .ok_or_else(|| Error::Dataset(format!("feature `{}` expects a number", spec.name)))?;
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                    ranges.push(Some((lo, hi)));
                }
                FeatureKind::Categorical { .. } => ranges.push(None),
            }
        }
        Ok(Normalizer {
            schema: schema.clone(),
            ranges,
        })
    }

    pub fn width(&self) -> usize {
        self.schema.encoded_width()
    }

    pub fn column_map(&self) -> Vec<ColumnOrigin> {
        let mut map = Vec::with_capacity(self.width());
        for (j, spec) in self.schema.features.iter().enumerate() {
            match &spec.kind {
                FeatureKind::Numeric => map.push(ColumnOrigin {
                    feature: j,
                    category: None,
                }),
                FeatureKind::Categorical { categories } => {
                    map.extend((0..categories.len()).map(|c| ColumnOrigin {
                        feature: j,
                        category: Some(c),
                    }))
                }
            }
        }
        map
    }

    /// Encodes rows without clamping: values outside the fitted range map
    /// outside `[0, 1]`.
    pub fn encode(&self, rows: &[Row]) -> Result<EncodedMatrix> {
        let d = self.width();
        let mut values = Matrix::zeros(rows.len(), d);
        for (i, row) in rows.iter().enumerate() {
            let out = values.row_mut(i);
            let mut col = 0;
            for (j, spec) in self.schema.features.iter().enumerate() {
                match (&spec.kind, value_at(row, j, &self.schema)?) {
                    (FeatureKind::Numeric, Value::Num(v)) => {
                        let (lo, hi) = self.ranges[j].expect("numeric feature has a range");
                        out[col] = (v - lo) / scale(lo, hi);
                        col += 1;
                    }
                    (FeatureKind::Categorical { categories }, Value::Cat(c)) => {
                        if c >= categories.len() {
                            return Err(Error::Dataset(format!(
                                "category index {c} out of range for feature `{}`",
                                spec.name
                            )));
                        }
                        out[col + c] = 1.0;
                        col += categories.len();
                    }
                    (_, v) => {
                        return Err(Error::Dataset(format!(
                            "value {v:?} does not fit feature `{}`",
                            spec.name
                        )))
                    }
                }
            }
        }
        Ok(EncodedMatrix {
            values,
            column_map: self.column_map(),
        })
    }

    /// Inverse transform: numeric columns are clamped to `[0, 1]` and rescaled,
    /// one-hot groups decode to their arg-max (first index on ties).
    pub fn decode(&self, matrix: &Matrix) -> Result<Vec<Row>> {
        let d = self.width();
        if matrix.cols() != d {
            return Err(Error::shape("decode", format!("{d} columns"), format!("{} columns", matrix.cols())));
        }
        let mut rows = Vec::with_capacity(matrix.rows());
        for i in 0..matrix.rows() {
            let src = matrix.row(i);
            let mut row = Vec::with_capacity(self.schema.len());
            let mut col = 0;
            for (j, spec) in self.schema.features.iter().enumerate() {
                match &spec.kind {
                    FeatureKind::Numeric => {
                        let (lo, hi) = self.ranges[j].expect("numeric feature has a range");
                        let x = src[col].clamp(0.0, 1.0);
                        row.push(Value::Num(lo + x * (hi - lo)));
                        col += 1;
                    }
                    FeatureKind::Categorical { categories } => {
                        let group = &src[col..col + categories.len()];
                        let mut best = 0;
                        for (k, &v) in group.iter().enumerate() {
                            if v > group[best] {
                                best = k;
                            }
                        }
                        row.push(Value::Cat(best));
                        col += categories.len();
                    }
                }
            }
            rows.push(row);
        }
        Ok(rows)
    }
}

fn scale(lo: f64, hi: f64) -> f64 {
    let r = hi - lo;
    // constant feature: fitted rows encode to 0.0
    if r > 0.0 {
        r
    } else {
        1.0
    }
}

fn value_at(row: &[Value], j: usize, schema: &Schema) -> Result<Value> {
    if row.len() != schema.len() {
        return Err(Error::Dataset(format!(
            "row has {} values, schema has {} features",
            row.len(),
            schema.len()
        )));
    }
    Ok(row[j])
}

/// Fits a normalizer on `rows` and encodes them.
pub fn fit_encode(rows: &[Row], schema: &Schema) -> Result<(EncodedMatrix, Normalizer)> {
    let normalizer = Normalizer::fit(rows, schema)?;
    let encoded = normalizer.encode(rows)?;
    Ok((encoded, normalizer))
}

pub fn encode_with(normalizer: &Normalizer, rows: &[Row]) -> Result<EncodedMatrix> {
    normalizer.encode(rows)
}

pub fn decode(matrix: &Matrix, normalizer: &Normalizer) -> Result<Vec<Row>> {
    normalizer.decode(matrix)
}
