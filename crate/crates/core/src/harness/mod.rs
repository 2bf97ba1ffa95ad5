//! Training, evaluation and comparison runs on the thermal benchmark.
//!
//! An epoch is one simulated day (96 quarter-hour steps) of interaction.
//! Training episodes last three days and are drawn from the part of the
//! weather horizon not reserved for evaluation.

mod compare;
mod config;
mod eval;
mod metrics;
mod train;

pub use compare::{
    build_report, censored_median, compare, write_curves, Comparison, ComparisonReport, LabelReport,
};
pub use config::{HarnessConfig, RunConfig};
pub use eval::{
    evaluate, evaluate_with, split_horizon, BaselinePolicy, ConstantPolicy, Controller, Decision,
    EvalSet, EvalSummary, GreedyPolicy, HorizonSplit,
};
pub use metrics::{
    read_metrics, EpochRow, MetricsWriter, RunMetrics, RunSummary, EPOCH_UNIT, METRICS_HEADER,
};
pub use train::{seed_dir, train, Experiment, RunArtifacts, RunOutput, Trainer};
