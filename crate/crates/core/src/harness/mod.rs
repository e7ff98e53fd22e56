//! Experiment orchestration behind the `semres` command-line tool:
//! cross-validated evaluation, the denoising benchmark, distribution
//! comparison and rank statistics.

mod bench;
mod config;
mod data;
mod evaluate;
mod results;
mod stats;

pub use bench::{
    denoise_bench, dist_compare, dist_compare_checkpoint, generate_encoded, run_denoise_bench, run_dist_compare,
    scatter_csv, BenchEntry, DistReport, FeatureDistribution, BENCH_PROTOCOL, DIST_BINS,
};
pub use config::ExperimentConfig;
pub use data::{keel_dir_from_env, load_dataset, read_dataset_file, DataOrigin, KEEL_DIR_ENV};
pub use evaluate::{
    evaluate_cell, name_tag, rows_digest, run_evaluate, write_evaluate_outputs, CellFailure, DatasetEntry, EvaluateReport,
    Manifest, METRICS,
};
pub use results::{format_value, Aggregate, Record, ResultTable, RESULT_HEADER};
pub use stats::{parse_wide_csv, run_stats, stats_from_table, MetricMatrix, StatsReport};
