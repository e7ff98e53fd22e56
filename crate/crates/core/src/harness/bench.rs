use log::info;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::data::load_dataset;
use super::evaluate::name_tag;
use super::results::{finish_csv, format_value, write_text};
use crate::dataio::{fit_encode, Normalizer, Row};
use crate::denoisers::{Denoiser, Network};
use crate::diffusion::{denoise_from, q_sample, sample, NoiseSchedule};
use crate::metrics::{ecdf, histogram, mean_ecdf_distance, psnr, quantile_pearson};
use crate::nn::Matrix;
use crate::oversample::Method;
use crate::rng::{derive_seed, seeded};
use crate::trainer::{train, Checkpoint};
use crate::{Error, Result};

pub const DIST_BINS: usize = 32;
const ECDF_POINTS: usize = 101;

pub const BENCH_PROTOCOL: &str = "each minority row is noised to the start step with one seeded eps draw; \
every model then runs the reverse chain from that step using the same seeded noise stream; \
reconstructions are clamped to [0, 1] and compared with the originals by PSNR (MAX = 1)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub dataset: String,
    pub model: String,
    pub start_step: usize,
    pub rows: usize,
    pub psnr: f64,
}

/// Noises `original` to `start_step` and denoises it with each model under a
/// shared noise stream. Returns `(psnr, reconstruction)` per model.
pub fn denoise_bench<D: Denoiser>(
    original: &Matrix,
    models: &mut [D],
    schedule: &NoiseSchedule,
    start_step: usize,
    seed: u64,
) -> Result<Vec<(f64, Matrix)>> {
    if let Some(m) = models.iter().find(|m| m.d_in() != original.cols()) {
        return Err(Error::shape("denoise bench", original.cols(), m.d_in()));
    }
    let noisy = if start_step == 0 {
        original.clone()
    } else {
        let eps = Matrix::randn(original.rows(), original.cols(), &mut seeded(derive_seed(seed, &[1])));
        q_sample(original, start_step, &eps, schedule)?
    };
    models
        .iter_mut()
        .map(|model| {
            let mut rng = seeded(derive_seed(seed, &[2]));
            let recon = denoise_from(model, noisy.clone(), start_step, schedule, &mut rng)?.clamp(0.0, 1.0);
            Ok((psnr(original, &recon)?, recon))
        })
        .collect()
}

/// `row,original_0,original_1,<model>_0,<model>_1,…` over the first two
/// encoded columns.
pub fn scatter_csv(original: &Matrix, reconstructions: &[(&str, &Matrix)]) -> Result<String> {
    let cols = original.cols().min(2);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["row".to_string()];
    for name in std::iter::once("original").chain(reconstructions.iter().map(|(n, _)| *n)) {
        header.extend((0..cols).map(|j| format!("{name}_{j}")));
    }
    w.write_record(&header)?;
    for i in 0..original.rows() {
        let mut rec = vec![i.to_string()];
        for m in std::iter::once(original).chain(reconstructions.iter().map(|(_, m)| *m)) {
            rec.extend(m.row(i)[..cols].iter().map(|v| format_value(*v)));
        }
        w.write_record(&rec)?;
    }
    finish_csv(w)
}

fn train_on_minority(minority: &Matrix, config: &ExperimentConfig, method: Method, seed: u64) -> Result<Checkpoint> {
    let tc = config.oversample.diffusion.train_config(method, seed)?;
    Ok(train(minority, &tc)?.checkpoint)
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Trains an MLP and a SEMST denoiser on each dataset's minority rows (same
/// T, same seed) and compares their reconstructions.
pub fn run_denoise_bench(config: &ExperimentConfig) -> Result<Vec<BenchEntry>> {
    if config.datasets.is_empty() {
        return Err(Error::Config("at least one dataset is required".into()));
    }
    let mut entries = Vec::new();
    for spec in &config.datasets {
        let (ds, origin) = load_dataset(spec, config.keel_dir.as_deref())?;
        info!("denoise bench on {} ({origin})", ds.name);
        let (encoded, _) = fit_encode(&ds.minority_rows(), &ds.schema)?;
        let minority = encoded.values;
        let seed = derive_seed(config.seed, &[name_tag(&ds.name)]);
        let mlp = train_on_minority(&minority, config, Method::MlpDdpm, seed)?;
        let semst = train_on_minority(&minority, config, Method::SemresDdpm, seed)?;
        let schedule = semst.schedule()?;
        let start = config.bench_start_step.unwrap_or(schedule.timesteps);
        let mut models: Vec<Network> = vec![mlp.network()?, semst.network()?];
        let results = denoise_bench(&minority, &mut models, &schedule, start, derive_seed(seed, &[7]))?;
        for ((name, _), (value, _)) in [("mlp", ()), ("semst", ())].iter().zip(&results) {
            entries.push(BenchEntry {
                dataset: ds.name.clone(),
                model: name.to_string(),
                start_step: start,
                rows: minority.rows(),
                psnr: *value,
            });
        }
        if let Some(dir) = &config.output_dir {
            let csv = scatter_csv(&minority, &[("mlp", &results[0].1), ("semst", &results[1].1)])?;
            write_text(&dir.join(format!("denoise_scatter_{}.csv", file_stem(&ds.name))), &csv)?;
        }
    }
    if let Some(dir) = &config.output_dir {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["dataset", "model", "start_step", "rows", "psnr"])?;
        for e in &entries {
            w.write_record([
                e.dataset.clone(),
                e.model.clone(),
                e.start_step.to_string(),
                e.rows.to_string(),
                format_value(e.psnr),
            ])?;
        }
        write_text(&dir.join("denoise_bench.csv"), &finish_csv(w)?)?;
        let report = serde_json::json!({ "protocol": BENCH_PROTOCOL, "entries": entries });
        write_text(&dir.join("denoise_bench.json"), &serde_json::to_string_pretty(&report)?)?;
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDistribution {
    pub column: usize,
    pub real_histogram: Vec<usize>,
    pub synthetic_histogram: Vec<usize>,
    pub real_ecdf: Vec<f64>,
    pub synthetic_ecdf: Vec<f64>,
    /// Quantile-matched Pearson correlation; `None` when a side is constant.
    pub pearson: Option<f64>,
    pub ecdf_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistReport {
    pub dataset: String,
    pub features: Vec<FeatureDistribution>,
    pub mean_pearson: Option<f64>,
    /// Mean over the first two encoded columns.
    pub selected_pearson: Option<f64>,
    pub mean_ecdf_distance: f64,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn ecdf_grid() -> Vec<f64> {
    (0..ECDF_POINTS).map(|i| i as f64 / (ECDF_POINTS - 1) as f64).collect()
}

/// Per-column histograms, ECDFs and quantile-matched correlations.
pub fn dist_compare(dataset: &str, real: &Matrix, synthetic: &Matrix) -> Result<DistReport> {
    if real.cols() != synthetic.cols() {
        return Err(Error::shape("dist compare", real.cols(), synthetic.cols()));
    }
    if real.is_empty() || synthetic.is_empty() {
        return Err(Error::Dataset("distribution comparison of an empty sample".into()));
    }
    let grid = ecdf_grid();
    let features: Vec<FeatureDistribution> = (0..real.cols())
        .map(|j| {
            let (r, s) = (real.column(j), synthetic.column(j));
            let pearson = if r == s {
                Some(1.0)
            } else {
                quantile_pearson(&r, &s).ok()
            };
            FeatureDistribution {
                column: j,
                real_histogram: histogram(&r, DIST_BINS),
                synthetic_histogram: histogram(&s, DIST_BINS),
                real_ecdf: ecdf(&r, &grid),
                synthetic_ecdf: ecdf(&s, &grid),
                pearson,
                ecdf_distance: mean_ecdf_distance(&r, &s),
            }
        })
        .collect();
    Ok(DistReport {
        dataset: dataset.to_string(),
        mean_pearson: mean_of(features.iter().map(|f| f.pearson)),
        selected_pearson: mean_of(features.iter().take(2).map(|f| f.pearson)),
        mean_ecdf_distance: features.iter().map(|f| f.ecdf_distance).sum::<f64>() / features.len() as f64,
        features,
    })
}

impl DistReport {
    /// `feature,bin,lo,hi,real,synthetic`.
    pub fn histogram_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["feature", "bin", "lo", "hi", "real", "synthetic"])?;
        for f in &self.features {
            for b in 0..DIST_BINS {
                w.write_record([
                    f.column.to_string(),
                    b.to_string(),
                    format_value(b as f64 / DIST_BINS as f64),
                    format_value((b + 1) as f64 / DIST_BINS as f64),
                    f.real_histogram[b].to_string(),
                    f.synthetic_histogram[b].to_string(),
                ])?;
            }
        }
        finish_csv(w)
    }

    /// `feature,x,real,synthetic` on an evenly spaced grid over `[0, 1]`.
    pub fn ecdf_csv(&self) -> Result<String> {
        let grid = ecdf_grid();
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["feature", "x", "real", "synthetic"])?;
        for f in &self.features {
            for (k, x) in grid.iter().enumerate() {
                w.write_record([
                    f.column.to_string(),
                    format_value(*x),
                    format_value(f.real_ecdf[k]),
                    format_value(f.synthetic_ecdf[k]),
                ])?;
            }
        }
        finish_csv(w)
    }

    pub fn write(&self, dir: &std::path::Path) -> Result<()> {
        let stem = file_stem(&self.dataset);
        write_text(&dir.join(format!("dist_{stem}_hist.csv")), &self.histogram_csv()?)?;
        write_text(&dir.join(format!("dist_{stem}_ecdf.csv")), &self.ecdf_csv()?)?;
        write_text(&dir.join(format!("dist_{stem}.json")), &serde_json::to_string_pretty(self)?)
    }
}

/// Draws `n` rows from a checkpoint, clamped and snapped to valid one-hot
/// groups through its normaliser when one is attached.
pub fn generate_encoded(checkpoint: &Checkpoint, n: usize, seed: u64) -> Result<Matrix> {
    let mut net = checkpoint.network()?;
    let schedule = checkpoint.schedule()?;
    let raw = sample(&mut net, n, checkpoint.meta.architecture.d_in(), &schedule, &mut seeded(seed))?.clamp(0.0, 1.0);
    match &checkpoint.meta.normalizer {
        Some(norm) => Ok(norm.encode(&norm.decode(&raw)?)?.values),
        None => Ok(raw),
    }
}

/// Compares real minority rows with as many rows generated from `checkpoint`.
pub fn dist_compare_checkpoint(dataset: &str, checkpoint: &Checkpoint, real_rows: &[Row], seed: u64) -> Result<DistReport> {
    let norm: &Normalizer = checkpoint
        .meta
        .normalizer
        .as_ref()
        .ok_or_else(|| Error::Config("checkpoint has no normalizer attached".into()))?;
    let real = norm.encode(real_rows)?.values.clamp(0.0, 1.0);
    let synthetic = generate_encoded(checkpoint, real.rows(), seed)?;
    dist_compare(dataset, &real, &synthetic)
}

/// Trains a SEMST generator per dataset on all minority rows and compares
/// its samples with them.
pub fn run_dist_compare(config: &ExperimentConfig) -> Result<Vec<DistReport>> {
    if config.datasets.is_empty() {
        return Err(Error::Config("at least one dataset is required".into()));
    }
    let mut reports = Vec::new();
    for spec in &config.datasets {
        let (ds, origin) = load_dataset(spec, config.keel_dir.as_deref())?;
        info!("distribution comparison on {} ({origin})", ds.name);
        let rows = ds.minority_rows();
        let (encoded, norm) = fit_encode(&rows, &ds.schema)?;
        let seed = derive_seed(config.seed, &[name_tag(&ds.name)]);
        let ck = train_on_minority(&encoded.values, config, Method::SemresDdpm, seed)?.with_normalizer(norm);
        let report = dist_compare_checkpoint(&ds.name, &ck, &rows, derive_seed(seed, &[8]))?;
        if let Some(dir) = &config.output_dir {
            report.write(dir)?;
        }
        reports.push(report);
    }
    Ok(reports)
}
