//! Benchmark harness for kernel quadrature.
//!
//! Reads or generates a dataset, runs every configured method at every node
//! count for a number of seeded trials, and writes plot-ready CSV files. The
//! output is a function of the config alone: per-trial random streams are
//! derived from the master seed and rows are sorted before writing, so the
//! number of worker threads never changes a byte.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod rates;
pub mod summary;

pub use config::{DatasetSource, ExperimentConfig, Method, TargetChoice};
pub use error::{BenchError, Result};
pub use experiment::{compress_dataset, run_experiment, worker_count, Experiment, ExperimentResult, Row};
pub use summary::{summarize, SummaryRow};
