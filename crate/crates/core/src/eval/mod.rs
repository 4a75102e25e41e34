//! Success-rate, trial-count and planning-cost metrics, and the evaluation suite.

mod metrics;
mod suite;

pub use metrics::{compute_metrics, mean_interval, merge_seeds, wilson_interval, MetricsReport, SeedMetrics};
pub use suite::{evaluate, instance_rng, policy_rng, run_suite, SuiteCell, SuiteRow};
