use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::data::{load_dataset, DataOrigin};
use super::results::{write_text, Record, ResultTable};
use crate::classifiers::ClassifierKind;
use crate::dataio::{class_stats, stratified_kfold, Dataset, FoldPlan, Row, Value};
use crate::metrics::{auc, confusion, f1, g_mean};
use crate::oversample::{balance, Method, OversampleRequest};
use crate::rng::derive_seed;
use crate::{Error, Result};

pub const METRICS: [&str; 3] = ["f1", "g_mean", "auc"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    pub origin: DataOrigin,
    pub rows: usize,
    pub minority: usize,
    pub majority: usize,
    pub schema_fingerprint: String,
    pub fold_seed: u64,
}

/// Config, package version and per-dataset provenance of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub datasets: Vec<DatasetEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub dataset: String,
    pub method: String,
    pub fold: usize,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct EvaluateReport {
    pub table: ResultTable,
    pub failures: Vec<CellFailure>,
    pub manifest: Manifest,
}

/// Stable seed component for a name.
pub fn name_tag(name: &str) -> u64 {
    let bytes: Vec<u64> = name.bytes().map(u64::from).collect();
    derive_seed(0, &bytes)
}

/// SHA-256 over the exact bits of every value.
pub fn rows_digest(rows: &[Row], labels: &[bool]) -> String {
    let mut h = Sha256::new();
    for (row, label) in rows.iter().zip(labels) {
        for v in row {
            match v {
                Value::Num(x) => {
                    h.update([0u8]);
                    h.update(x.to_bits().to_le_bytes());
                }
                Value::Cat(c) => {
                    h.update([1u8]);
                    h.update((*c as u64).to_le_bytes());
                }
            }
        }
        h.update([2u8, *label as u8]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

struct Prepared {
    dataset: Dataset,
    plan: FoldPlan,
    entry: DatasetEntry,
}

fn prepare(config: &ExperimentConfig) -> Result<Vec<Prepared>> {
    config
        .datasets
        .iter()
        .map(|spec| {
            let (dataset, origin) = load_dataset(spec, config.keel_dir.as_deref())?;
            let fold_seed = derive_seed(config.seed, &[name_tag(&dataset.name)]);
            let plan = stratified_kfold(&dataset, config.folds, fold_seed)?;
            let (minority, majority, _) = class_stats(&dataset);
            info!("{}: {} rows ({minority}/{majority}) from {origin}", dataset.name, dataset.len());
            let entry = DatasetEntry {
                name: dataset.name.clone(),
                origin,
                rows: dataset.len(),
                minority,
                majority,
                schema_fingerprint: dataset.schema.fingerprint(),
                fold_seed,
            };
            Ok(Prepared { dataset, plan, entry })
        })
        .collect()
}

/// Balances one training fold with one method, fits every classifier and
/// scores the untouched test fold.
pub fn evaluate_cell(
    dataset: &Dataset,
    plan: &FoldPlan,
    fold: usize,
    method: Method,
    classifiers: &[ClassifierKind],
    config: &ExperimentConfig,
) -> Result<Vec<Record>> {
    let train = dataset.subset(&plan.train_indices(fold));
    let test_idx = plan.test_indices(fold);
    let test = dataset.subset(&test_idx);
    let before = rows_digest(&test.rows, &test.labels);

    let seed = derive_seed(config.seed, &[name_tag(&dataset.name), fold as u64, name_tag(method.name())]);
    let balanced = balance(&OversampleRequest {
        train: &train,
        method,
        config: &config.oversample,
        seed,
    })?;
    let after = rows_digest(
        &test_idx.iter().map(|&i| dataset.rows[i].clone()).collect::<Vec<_>>(),
        &test_idx.iter().map(|&i| dataset.labels[i]).collect::<Vec<_>>(),
    );
    if before != after {
        return Err(Error::Dataset("test fold changed while balancing the training fold".into()));
    }
    let x_test = balanced.normalizer.encode(&test.rows)?.values;

    let mut records = Vec::with_capacity(classifiers.len() * METRICS.len());
    for kind in classifiers {
        let model = kind.fit(&balanced.features, &balanced.labels)?;
        let scores = model.score(&x_test)?;
        let pred: Vec<bool> = scores.iter().map(|&s| s >= config.threshold).collect();
        let cm = confusion(&test.labels, &pred)?;
        let values = [f1(&cm), g_mean(&cm), auc(&scores, &test.labels)?];
        for (metric, value) in METRICS.iter().zip(values) {
            records.push(Record {
                dataset: dataset.name.clone(),
                method: method.name().to_string(),
                classifier: kind.name().to_string(),
                fold,
                metric: metric.to_string(),
                value,
            });
        }
    }
    Ok(records)
}

/// Cross-validated evaluation of every (dataset, method, classifier).
/// Per-cell errors are collected rather than aborting the run.
pub fn run_evaluate(config: &ExperimentConfig) -> Result<EvaluateReport> {
    config.validate()?;
    let classifiers = config.classifier_kinds()?;
    let prepared = prepare(config)?;

    let units: Vec<(usize, usize, Method)> = prepared
        .iter()
        .enumerate()
        .flat_map(|(d, p)| (0..p.plan.k).flat_map(move |f| config.methods.iter().map(move |&m| (d, f, m))))
        .collect();
    let run = |&(d, fold, method): &(usize, usize, Method)| {
        let p = &prepared[d];
        let start = Instant::now();
        let out = evaluate_cell(&p.dataset, &p.plan, fold, method, &classifiers, config);
        info!("{} fold {fold} {method}: {:.1}s", p.dataset.name, start.elapsed().as_secs_f64());
        out
    };
    let outcomes: Vec<Result<Vec<Record>>> = if config.parallel {
        units.par_iter().map(run).collect()
    } else {
        units.iter().map(run).collect()
    };

    let mut table = ResultTable::default();
    let mut failures = Vec::new();
    for ((d, fold, method), outcome) in units.iter().zip(outcomes) {
        match outcome {
            Ok(records) => table.records.extend(records),
            Err(e) => {
                warn!("{} fold {fold} {method} failed: {e}", prepared[*d].dataset.name);
                failures.push(CellFailure {
                    dataset: prepared[*d].dataset.name.clone(),
                    method: method.name().to_string(),
                    fold: *fold,
                    error: e.to_string(),
                });
            }
        }
    }
    table.sort();
    Ok(EvaluateReport {
        table,
        failures,
        manifest: Manifest {
            tool: "semres".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            datasets: prepared.into_iter().map(|p| p.entry).collect(),
        },
    })
}

/// Writes `results.csv`, `aggregates.csv`, `manifest.json` and, when any cell
/// failed, `failures.json`.
pub fn write_evaluate_outputs(report: &EvaluateReport, dir: &Path) -> Result<()> {
    write_text(&dir.join("results.csv"), &report.table.to_csv()?)?;
    write_text(&dir.join("aggregates.csv"), &report.table.aggregates_csv()?)?;
    write_text(&dir.join("manifest.json"), &serde_json::to_string_pretty(&report.manifest)?)?;
    if !report.failures.is_empty() {
        write_text(&dir.join("failures.json"), &serde_json::to_string_pretty(&report.failures)?)?;
    }
    Ok(())
}
