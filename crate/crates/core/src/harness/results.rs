use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const RESULT_HEADER: [&str; 6] = ["dataset", "method", "classifier", "fold", "metric", "value"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub dataset: String,
    pub method: String,
    pub classifier: String,
    pub fold: usize,
    pub metric: String,
    pub value: f64,
}

impl Record {
    fn key(&self) -> (&str, &str, &str, usize, &str) {
        (&self.dataset, &self.method, &self.classifier, self.fold, &self.metric)
    }
}

/// Mean and sample standard deviation over folds for one
/// (dataset, method, classifier, metric) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub dataset: String,
    pub method: String,
    pub classifier: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub folds: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub records: Vec<Record>,
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

impl ResultTable {
    /// Sorts records by (dataset, method, classifier, fold, metric).
    pub fn sort(&mut self) {
        self.records.sort_by(|a, b| a.key().cmp(&b.key()));
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut cells: BTreeMap<(&str, &str, &str, &str), Vec<f64>> = BTreeMap::new();
        for r in &self.records {
            cells
                .entry((&r.dataset, &r.method, &r.classifier, &r.metric))
                .or_default()
                .push(r.value);
        }
        cells
            .into_iter()
            .map(|((dataset, method, classifier, metric), values)| {
                let (mean, std) = mean_std(&values);
                Aggregate {
                    dataset: dataset.to_string(),
                    method: method.to_string(),
                    classifier: classifier.to_string(),
                    metric: metric.to_string(),
                    mean,
                    std,
                    folds: values.len(),
                }
            })
            .collect()
    }

    /// Mean of `metric` over classifiers and folds, per (dataset, method).
    pub fn cell_means(&self, metric: &str) -> BTreeMap<(String, String), f64> {
        let mut cells: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
        for r in self.records.iter().filter(|r| r.metric == metric) {
            cells.entry((r.dataset.clone(), r.method.clone())).or_default().push(r.value);
        }
        cells.into_iter().map(|(k, v)| (k, mean_std(&v).0)).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(RESULT_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.dataset.as_str(),
                r.method.as_str(),
                r.classifier.as_str(),
                &r.fold.to_string(),
                r.metric.as_str(),
                &format_value(r.value),
            ])?;
        }
        finish_csv(w)
    }

    pub fn from_csv(text: &str) -> Result<ResultTable> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != RESULT_HEADER {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {}", RESULT_HEADER.join(",")),
            });
        }
        let mut records = Vec::new();
        for row in rdr.deserialize() {
            let r: Record = row?;
            records.push(r);
        }
        Ok(ResultTable { records })
    }

    pub fn aggregates_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["dataset", "method", "classifier", "metric", "mean", "std", "folds"])?;
        for a in self.aggregates() {
            w.write_record([
                a.dataset.as_str(),
                a.method.as_str(),
                a.classifier.as_str(),
                a.metric.as_str(),
                &format_value(a.mean),
                &format_value(a.std),
                &a.folds.to_string(),
            ])?;
        }
        finish_csv(w)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_csv()?)
    }
}

/// Shortest round-trip representation; infinities as `inf` / `-inf`.
pub fn format_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

pub(crate) fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(format!("csv output is not UTF-8: {e}")))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(dataset: &str, method: &str, fold: usize, value: f64) -> Record {
        Record {
            dataset: dataset.into(),
            method: method.into(),
            classifier: "knn".into(),
            fold,
            metric: "f1".into(),
            value,
        }
    }

    #[test]
    fn csv_roundtrip_and_header() {
        let mut t = ResultTable {
            records: vec![rec("b", "smote", 1, 0.25), rec("a", "none", 0, 0.1 + 0.2)],
        };
        t.sort();
        let text = t.to_csv().unwrap();
        assert!(text.starts_with("dataset,method,classifier,fold,metric,value\na,none,knn,0,f1,0.30000000000000004\n"));
        assert!(!text.contains('\r'));
        assert_eq!(ResultTable::from_csv(&text).unwrap(), t);
        assert!(ResultTable::from_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn aggregates_match_recomputation() {
        let t = ResultTable {
            records: (0..5).map(|f| rec("a", "none", f, f as f64 / 10.0)).collect(),
        };
        let agg = t.aggregates();
        assert_eq!(agg.len(), 1);
        assert!((agg[0].mean - 0.2).abs() < 1e-12);
        assert!((agg[0].std - 0.158113883).abs() < 1e-9);
        assert_eq!(agg[0].folds, 5);
    }
}
