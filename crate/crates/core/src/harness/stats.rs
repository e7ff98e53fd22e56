use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::results::{finish_csv, format_value, write_text, ResultTable};
use crate::metrics::{friedman, mean_ranks, nemenyi_cd};
use crate::{Error, Result};

/// Datasets × methods matrix of one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix {
    pub datasets: Vec<String>,
    pub methods: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

/// `dataset,<method>,<method>,…` with one row per dataset.
pub fn parse_wide_csv(text: &str) -> Result<MetricMatrix> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "expected a dataset column followed by method columns".into(),
        });
    }
    let methods = header[1..].to_vec();
    let mut datasets = Vec::new();
    let mut values = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        if row.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), row.len()),
            });
        }
        datasets.push(row[0].to_string());
        let parsed = row
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{v}` is not a number"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        values.push(parsed);
    }
    Ok(MetricMatrix { datasets, methods, values })
}

/// Averages `metric` over classifiers and folds for every (dataset, method).
/// Methods keep their first-appearance order unless `methods` is given.
pub fn stats_from_table(table: &ResultTable, metric: &str, methods: Option<&[String]>) -> Result<MetricMatrix> {
    let cells = table.cell_means(metric);
    let mut datasets: Vec<String> = Vec::new();
    let mut seen: Vec<String> = Vec::new();
    for r in table.records.iter().filter(|r| r.metric == metric) {
        if !datasets.contains(&r.dataset) {
            datasets.push(r.dataset.clone());
        }
        if !seen.contains(&r.method) {
            seen.push(r.method.clone());
        }
    }
    let methods: Vec<String> = methods.map(<[String]>::to_vec).unwrap_or(seen);
    if datasets.is_empty() {
        return Err(Error::Dataset(format!("no records for metric `{metric}`")));
    }
    let mut missing = Vec::new();
    let mut values = Vec::with_capacity(datasets.len());
    for d in &datasets {
        let mut row = Vec::with_capacity(methods.len());
        for m in &methods {
            match cells.get(&(d.clone(), m.clone())) {
                Some(v) => row.push(*v),
                None => {
                    missing.push(format!("{d}/{m}"));
                    row.push(f64::NAN);
                }
            }
        }
        values.push(row);
    }
    if !missing.is_empty() {
        return Err(Error::Dataset(format!("missing cells: {}", missing.join(", "))));
    }
    Ok(MetricMatrix { datasets, methods, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub methods: Vec<String>,
    pub datasets: usize,
    /// Higher is better; ranks run from 1 to k.
    pub mean_ranks: BTreeMap<String, f64>,
    pub chi2: f64,
    pub p_value: f64,
    pub critical_difference: f64,
    /// `[mean rank − CD/2, mean rank + CD/2]` per method.
    pub intervals: BTreeMap<String, [f64; 2]>,
    pub significant: bool,
    pub verdict: String,
}

impl StatsReport {
    /// `method,mean_rank,lower,upper` in the report's method order.
    pub fn intervals_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["method", "mean_rank", "lower", "upper"])?;
        for m in &self.methods {
            let [lo, hi] = self.intervals[m];
            w.write_record([m.clone(), format_value(self.mean_ranks[m]), format_value(lo), format_value(hi)])?;
        }
        finish_csv(w)
    }

    /// Writes `stats.json` and `intervals.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join("stats.json"), &serde_json::to_string_pretty(self)?)?;
        write_text(&dir.join("intervals.csv"), &self.intervals_csv()?)
    }
}

/// Friedman test at α = 0.05 plus Nemenyi intervals.
pub fn run_stats(matrix: &MetricMatrix) -> Result<StatsReport> {
    let k = matrix.methods.len();
    let n = matrix.datasets.len();
    let table = mean_ranks(&matrix.values, true)?;
    let fr = friedman(&table)?;
    let cd = nemenyi_cd(k, n, 0.05)?;
    let significant = fr.p_value < 0.05;
    let mean_ranks = matrix.methods.iter().cloned().zip(table.mean_ranks.iter().copied()).collect();
    let intervals = matrix
        .methods
        .iter()
        .cloned()
        .zip(table.mean_ranks.iter().map(|&r| [r - cd / 2.0, r + cd / 2.0]))
        .collect();
    let verdict = if significant {
        format!("significant difference (p = {:.3e})", fr.p_value)
    } else {
        "no significant difference".to_string()
    };
    Ok(StatsReport {
        methods: matrix.methods.clone(),
        datasets: n,
        mean_ranks,
        chi2: fr.chi2,
        p_value: fr.p_value,
        critical_difference: cd,
        intervals,
        significant,
        verdict,
    })
}
