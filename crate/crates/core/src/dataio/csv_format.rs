use super::{pick_minority, Dataset, FeatureKind, FeatureSpec, Row, Schema, Value};
use crate::{Error, Result};

/// Parses a headed CSV table. The class column is `class_column` when given,
/// otherwise the last column. A feature column is numeric iff every value
/// parses as a number; otherwise it becomes categorical with categories in
/// first-appearance order. With `positive_label = None` the less frequent
/// label is chosen.
pub fn parse_csv(text: &str, positive_label: Option<&str>, class_column: Option<&str>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::Parse {
            line: 1,
            message: "empty file".into(),
        });
    }
    if headers.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "need at least one feature column and a class column".into(),
        });
    }
    let class_idx = match class_column {
        Some(name) => headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("class column `{name}` not in header"),
        })?,
        None => headers.len() - 1,
    };

    let mut records: Vec<Vec<String>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                line: i + 2,
                message: format!("expected {} values, found {}", headers.len(), rec.len()),
            });
        }
        records.push(rec.iter().map(str::to_string).collect());
    }
    if records.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }

    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != class_idx).collect();
    let mut features = Vec::with_capacity(feature_cols.len());
    let mut columns: Vec<Vec<Value>> = Vec::with_capacity(feature_cols.len());
    for &c in &feature_cols {
        let parsed: Option<Vec<f64>> = records.iter().map(|r| r[c].parse::<f64>().ok()).collect();
        match parsed {
            Some(nums) if nums.iter().all(|v| v.is_finite()) => {
                features.push(FeatureSpec::numeric(headers[c].clone()));
                columns.push(nums.into_iter().map(Value::Num).collect());
            }
            _ => {
                let mut cats: Vec<String> = Vec::new();
                let mut col = Vec::with_capacity(records.len());
                for r in &records {
                    let idx = match cats.iter().position(|k| *k == r[c]) {
                        Some(i) => i,
                        None => {
                            cats.push(r[c].clone());
                            cats.len() - 1
                        }
                    };
                    col.push(Value::Cat(idx));
                }
                if cats.len() < 2 {
                    // A constant text column carries no information; keep it as
                    // a two-level categorical so the schema stays valid.
                    cats.push(format!("{}__other", cats[0]));
                }
                features.push(FeatureSpec::categorical(headers[c].clone(), cats)?);
                columns.push(col);
            }
        }
    }

    let mut counts: Vec<(String, usize)> = Vec::new();
    for r in &records {
        match counts.iter_mut().find(|(l, _)| *l == r[class_idx]) {
            Some(e) => e.1 += 1,
            None => counts.push((r[class_idx].clone(), 1)),
        }
    }
    let (positive, negative) = match positive_label {
        Some(p) => {
            if !counts.iter().any(|(l, _)| l == p) {
                return Err(Error::Dataset(format!("positive label `{p}` does not occur in the data")));
            }
            if counts.len() != 2 {
                return Err(Error::Dataset(format!(
                    "{} classes found; only binary problems are supported",
                    counts.len()
                )));
            }
            let other = counts.iter().find(|(l, _)| l != p).unwrap().0.clone();
            (p.to_string(), other)
        }
        None => pick_minority(&counts)?,
    };

    let rows = (0..records.len())
        .map(|i| columns.iter().map(|col| col[i]).collect())
        .collect();
    let labels = records.iter().map(|r| r[class_idx] == positive).collect();
    Dataset::new("csv", Schema::new(features), rows, labels, positive, negative)
}

/// Writes rows as a headed CSV table with a trailing `class` column.
/// Categorical values are written by name, numbers in shortest round-trip form.
pub fn write_rows_csv(schema: &Schema, rows: &[Row], classes: &[&str]) -> Result<String> {
    if rows.len() != classes.len() {
        return Err(Error::Dataset(format!("{} rows but {} class labels", rows.len(), classes.len())));
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header: Vec<&str> = schema.features.iter().map(|f| f.name.as_str()).collect();
    header.push("class");
    w.write_record(&header)?;
    for (row, class) in rows.iter().zip(classes) {
        schema.validate_row(row)?;
        let mut rec: Vec<String> = row
            .iter()
            .zip(&schema.features)
            .map(|(v, f)| match (v, &f.kind) {
                (Value::Num(x), _) => format!("{x}"),
                (Value::Cat(c), FeatureKind::Categorical { categories }) => categories[*c].clone(),
                (Value::Cat(c), FeatureKind::Numeric) => c.to_string(),
            })
            .collect();
        rec.push(class.to_string());
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Dataset(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Dataset(format!("csv output is not UTF-8: {e}")))
}

impl Dataset {
    pub fn to_csv(&self) -> Result<String> {
        let classes: Vec<&str> = self
            .labels
            .iter()
            .map(|&l| if l { self.positive_label.as_str() } else { self.negative_label.as_str() })
            .collect();
        write_rows_csv(&self.schema, &self.rows, &classes)
    }
}
