//! The benchmark protocol: folds, sweep execution, metrics, significance
//! tests and results export.

pub mod experiment;
pub mod folds;
pub mod metrics;
pub mod results;
pub mod stats;

pub use experiment::{
    run_experiment, MetricsSummary, ModelKind, ResultsTable, RunMetadata, SweepConfig, ALPHA,
};
pub use folds::{make_folds, FoldPlan, FoldSettings};
pub use metrics::{coverage, diversity, relative_distance, CellResult, ProblemRecord};
pub use stats::{welch_t_test, z_test_proportions};
