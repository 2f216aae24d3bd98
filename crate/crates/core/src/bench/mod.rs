//! Metrics, the multi-run experiment harness and CSV reports.

mod baseline;
mod harness;
pub mod metrics;
mod report;

pub use baseline::{majority_baseline_accuracy, spectral_baseline_accuracy};
pub use harness::{run_experiment, run_on_graph, sweep, DataSource, DataSpec, ModelFamily, ModelSpec, SweepAxis};
pub use metrics::{accuracy, evaluate, micro_f1, Metric};
pub use report::{format_sig, mean_and_std, write_csv, RunReport, CSV_HEADER};
