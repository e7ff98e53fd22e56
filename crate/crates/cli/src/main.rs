use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use semres_core::dataio::{class_stats, fit_encode, write_rows_csv};
use semres_core::harness::{
    dist_compare_checkpoint, generate_encoded, keel_dir_from_env, load_dataset, parse_wide_csv, run_denoise_bench,
    run_dist_compare, run_evaluate, run_stats, stats_from_table, write_evaluate_outputs, ExperimentConfig, MetricMatrix,
    ResultTable, BENCH_PROTOCOL, RESULT_HEADER,
};
use semres_core::oversample::{balance, DiffusionSettings, Method, OversampleRequest};
use semres_core::trainer::{smooth, train, Checkpoint};
use semres_core::{Error, Result};

#[derive(Parser)]
#[command(name = "semres", version, about = "Diffusion oversampling for imbalanced tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset and report its schema and class balance.
    Ingest(IngestArgs),
    /// Train a denoiser on a dataset's minority rows and save a checkpoint.
    Train(TrainArgs),
    /// Draw decoded rows from a checkpoint.
    Sample(SampleArgs),
    /// Balance a whole dataset with one method and write it as CSV.
    Oversample(OversampleArgs),
    /// Cross-validated evaluation of methods and classifiers.
    Evaluate(RunArgs),
    /// Compare MLP and SEMST reconstructions by PSNR.
    DenoiseBench(BenchArgs),
    /// Compare real and generated minority distributions.
    DistCompare(DistArgs),
    /// Friedman test and Nemenyi intervals over a metric table.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Arch {
    Semst,
    Mlp,
}

#[derive(Args)]
struct DataArgs {
    /// File path or benchmark dataset name.
    dataset: String,
    /// Directory of `<name>.dat` files; defaults to $SEMRES_KEEL_DIR.
    #[arg(long)]
    keel_dir: Option<PathBuf>,
}

#[derive(Args)]
struct DiffusionArgs {
    /// Start from the reduced desk-scale budget (T = 100, 3000 iterations).
    #[arg(long)]
    desk: bool,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    timesteps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

impl DiffusionArgs {
    fn apply(&self, settings: &mut DiffusionSettings) {
        if self.desk {
            *settings = DiffusionSettings::desk_scale();
        }
        if let Some(v) = self.iterations {
            settings.iterations = v;
        }
        if let Some(v) = self.timesteps {
            settings.timesteps = v;
        }
        if let Some(v) = self.lr {
            settings.lr = v;
        }
        if self.batch_size.is_some() {
            settings.batch_size = self.batch_size;
        }
    }

    fn settings(&self) -> DiffusionSettings {
        let mut s = DiffusionSettings::default();
        self.apply(&mut s);
        s
    }
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Write `encoded.csv` and `normalizer.json` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    diffusion: DiffusionArgs,
    #[arg(long, value_enum, default_value = "semst")]
    arch: Arch,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    /// Checkpoint directory.
    checkpoint: PathBuf,
    #[arg(short, long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Class label written next to each row.
    #[arg(long, default_value = "positive")]
    label: String,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OversampleArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    diffusion: DiffusionArgs,
    #[arg(long, default_value = "semres_ddpm")]
    method: String,
    /// Neighbourhood size for SMOTE and ADASYN.
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated dataset paths or names.
    #[arg(long, value_delimiter = ',')]
    datasets: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    classifiers: Vec<String>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    keel_dir: Option<PathBuf>,
    #[command(flatten)]
    diffusion: DiffusionArgs,
    /// Run work units one at a time.
    #[arg(long)]
    serial: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        self.diffusion.apply(&mut cfg.oversample.diffusion);
        if !self.datasets.is_empty() {
            cfg.datasets = self.datasets.clone();
        }
        if !self.methods.is_empty() {
            cfg.methods = self.methods.iter().map(|m| m.parse()).collect::<Result<_>>()?;
        }
        if !self.classifiers.is_empty() {
            cfg.classifiers = self.classifiers.clone();
        }
        if let Some(k) = self.folds {
            cfg.folds = k;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.keel_dir.is_some() {
            cfg.keel_dir = self.keel_dir.clone();
        }
        if cfg.keel_dir.is_none() {
            cfg.keel_dir = keel_dir_from_env();
        }
        if self.serial {
            cfg.parallel = false;
        }
        if self.out.is_some() {
            cfg.output_dir = self.out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Noising step the reverse chain starts from; defaults to T.
    #[arg(long)]
    start_step: Option<usize>,
}

#[derive(Args)]
struct DistArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Compare against an existing checkpoint instead of training one.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// `results.csv` from `evaluate`, or a wide `dataset,<method>,…` table.
    input: PathBuf,
    #[arg(long, default_value = "f1")]
    metric: String,
    /// Restrict to these methods (long-format input only).
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn keel_dir(arg: &Option<PathBuf>) -> Option<PathBuf> {
    arg.clone().or_else(keel_dir_from_env)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn ingest(args: &IngestArgs) -> Result<ExitCode> {
    let (ds, origin) = load_dataset(&args.data.dataset, keel_dir(&args.data.keel_dir).as_deref())?;
    let (n_min, n_maj, ir) = class_stats(&ds);
    let (encoded, normalizer) = fit_encode(&ds.minority_rows(), &ds.schema)?;
    print_json(&serde_json::json!({
        "name": ds.name,
        "origin": origin,
        "rows": ds.len(),
        "features": ds.schema.len(),
        "encoded_width": ds.schema.encoded_width(),
        "minority": n_min,
        "majority": n_maj,
        "imbalance_ratio": ir,
        "positive_label": ds.positive_label,
        "schema_fingerprint": ds.schema.fingerprint(),
    }))?;
    if let Some(dir) = &args.out {
        let mut w = String::new();
        for i in 0..encoded.values.rows() {
            let line: Vec<String> = encoded.values.row(i).iter().map(|v| format!("{v}")).collect();
            w.push_str(&line.join(","));
            w.push('\n');
        }
        write(&dir.join("encoded.csv"), &w)?;
        write(&dir.join("normalizer.json"), &serde_json::to_string_pretty(&normalizer)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn train_cmd(args: &TrainArgs) -> Result<ExitCode> {
    let (ds, origin) = load_dataset(&args.data.dataset, keel_dir(&args.data.keel_dir).as_deref())?;
    info!("training on {} minority rows of {} ({origin})", class_stats(&ds).0, ds.name);
    let (encoded, normalizer) = fit_encode(&ds.minority_rows(), &ds.schema)?;
    let method = match args.arch {
        Arch::Semst => Method::SemresDdpm,
        Arch::Mlp => Method::MlpDdpm,
    };
    let cfg = args.diffusion.settings().train_config(method, args.seed)?;
    let outcome = train(&encoded.values, &cfg)?;
    let mut checkpoint = outcome.checkpoint.with_normalizer(normalizer);
    checkpoint.meta.schema_fingerprint = Some(ds.schema.fingerprint());
    checkpoint.save(&args.out)?;
    let smoothed = smooth(&outcome.losses);
    let mut losses = String::from("iteration,loss,smoothed\n");
    for (i, (l, s)) in outcome.losses.iter().zip(&smoothed).enumerate() {
        losses.push_str(&format!("{},{l},{s}\n", i + 1));
    }
    write(&args.out.join("losses.csv"), &losses)?;
    print_json(&serde_json::json!({
        "checkpoint": args.out,
        "parameters": checkpoint.meta.parameter_count,
        "final_loss": checkpoint.meta.final_loss,
    }))?;
    Ok(ExitCode::SUCCESS)
}

fn sample_cmd(args: &SampleArgs) -> Result<ExitCode> {
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let normalizer = checkpoint
        .meta
        .normalizer
        .clone()
        .ok_or_else(|| Error::Config("checkpoint has no normalizer; retrain it with `semres train`".into()))?;
    let encoded = generate_encoded(&checkpoint, args.n, args.seed)?;
    let rows = normalizer.decode(&encoded)?;
    let classes = vec![args.label.as_str(); rows.len()];
    emit(&args.out, &write_rows_csv(&normalizer.schema, &rows, &classes)?)?;
    Ok(ExitCode::SUCCESS)
}

fn oversample_cmd(args: &OversampleArgs) -> Result<ExitCode> {
    let (ds, _) = load_dataset(&args.data.dataset, keel_dir(&args.data.keel_dir).as_deref())?;
    let method: Method = args.method.parse()?;
    let mut config = semres_core::oversample::OversampleConfig {
        k: args.k,
        ..Default::default()
    };
    args.diffusion.apply(&mut config.diffusion);
    let balanced = balance(&OversampleRequest {
        train: &ds,
        method,
        config: &config,
        seed: args.seed,
    })?;
    let mut rows = ds.rows.clone();
    rows.extend(balanced.synthetic_rows.iter().cloned());
    let classes: Vec<&str> = ds
        .labels
        .iter()
        .map(|&l| if l { ds.positive_label.as_str() } else { ds.negative_label.as_str() })
        .chain(std::iter::repeat_n(ds.positive_label.as_str(), balanced.synthetic_rows.len()))
        .collect();
    emit(&args.out, &write_rows_csv(&ds.schema, &rows, &classes)?)?;
    let (pos, neg) = balanced.class_counts();
    info!("{}: {} synthetic rows, {pos} positive / {neg} negative", ds.name, balanced.synthetic_count());
    Ok(ExitCode::SUCCESS)
}

fn evaluate_cmd(args: &RunArgs) -> Result<ExitCode> {
    let cfg = args.config()?;
    let report = run_evaluate(&cfg)?;
    match &cfg.output_dir {
        Some(dir) => write_evaluate_outputs(&report, dir)?,
        None => print!("{}", report.table.aggregates_csv()?),
    }
    if report.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &report.failures {
            warn!("failed cell {} / {} / fold {}: {}", f.dataset, f.method, f.fold, f.error);
        }
        Ok(ExitCode::from(1))
    }
}

fn bench_cmd(args: &BenchArgs) -> Result<ExitCode> {
    let mut cfg = args.run.config()?;
    if args.start_step.is_some() {
        cfg.bench_start_step = args.start_step;
    }
    let entries = run_denoise_bench(&cfg)?;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "# {BENCH_PROTOCOL}");
    let _ = writeln!(out, "dataset,model,start_step,rows,psnr");
    for e in &entries {
        let _ = writeln!(out, "{},{},{},{},{}", e.dataset, e.model, e.start_step, e.rows, e.psnr);
    }
    Ok(ExitCode::SUCCESS)
}

fn dist_cmd(args: &DistArgs) -> Result<ExitCode> {
    let cfg = args.run.config()?;
    let reports = match &args.checkpoint {
        Some(path) => {
            let checkpoint = Checkpoint::load(path)?;
            let [name] = cfg.datasets.as_slice() else {
                return Err(Error::Config("--checkpoint needs exactly one dataset".into()));
            };
            let (ds, _) = load_dataset(name, cfg.keel_dir.as_deref())?;
            if let Some(fp) = &checkpoint.meta.schema_fingerprint {
                if *fp != ds.schema.fingerprint() {
                    return Err(Error::Config(format!("checkpoint schema does not match dataset `{}`", ds.name)));
                }
            }
            let report = dist_compare_checkpoint(&ds.name, &checkpoint, &ds.minority_rows(), cfg.seed)?;
            if let Some(dir) = &cfg.output_dir {
                report.write(dir)?;
            }
            vec![report]
        }
        None => run_dist_compare(&cfg)?,
    };
    let summary: Vec<_> = reports
        .iter()
        .map(|r| {
            serde_json::json!({
                "dataset": r.dataset,
                "mean_pearson": r.mean_pearson,
                "selected_pearson": r.selected_pearson,
                "mean_ecdf_distance": r.mean_ecdf_distance,
            })
        })
        .collect();
    print_json(&serde_json::Value::Array(summary))?;
    Ok(ExitCode::SUCCESS)
}

fn stats_cmd(args: &StatsArgs) -> Result<ExitCode> {
    let text = read(&args.input)?;
    let long = text.lines().next().is_some_and(|h| h.trim() == RESULT_HEADER.join(","));
    let matrix: MetricMatrix = if long {
        let table = ResultTable::from_csv(&text)?;
        let methods = (!args.methods.is_empty()).then_some(args.methods.as_slice());
        stats_from_table(&table, &args.metric, methods)?
    } else {
        parse_wide_csv(&text)?
    };
    let report = run_stats(&matrix)?;
    if let Some(dir) = &args.out {
        report.write(dir)?;
    }
    print_json(&serde_json::to_value(&report)?)?;
    Ok(ExitCode::SUCCESS)
}

/// 2 for problems with the inputs, 1 for failures while running.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::Dataset(_)
        | Error::Io { .. }
        | Error::Json(_)
        | Error::Csv(_)
        | Error::Format(_)
        | Error::ParameterCount { .. }
        | Error::Truncated(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Train(a) => train_cmd(a),
        Command::Sample(a) => sample_cmd(a),
        Command::Oversample(a) => oversample_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::DenoiseBench(a) => bench_cmd(a),
        Command::DistCompare(a) => dist_cmd(a),
        Command::Stats(a) => stats_cmd(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
