//! Data handling, splits, hyperparameter sweeps and the benchmark driver.

pub mod benchmark;
pub mod config;
pub mod data;
pub mod report;
pub mod split;
pub mod sweep;

pub use benchmark::{
    rep_seed, run_benchmark, run_rep, BenchmarkConfig, ExperimentReport, MethodScores, MethodSummary, RepRecord,
    Summary, MIN_BENCHMARK_SIZE,
};
pub use config::ConfigMap;
pub use data::{load_csv, CsvOptions, Dataset, DatasetPreset, Delimiter, TargetColumn};
pub use report::{curves_csv, emit_report, reps_csv, summary_table, ReportPaths};
pub use split::{make_splits, SplitFractions, SplitPlan};
pub use sweep::{forest_seed, sweep_drf, sweep_drf_models, sweep_knn, SweepResult, DEFAULT_KMAX};
