//! Simulation experiments: convergence rate of the general estimator and
//! ordering/support recovery of the equal-variance estimator.

pub mod cpdag;
pub mod metrics;

mod harness;

pub use cpdag::{cpdag_shd, Cpdag};
pub use harness::{
    config_hash, read_records_csv, run_equal_variance_experiment, run_experiment,
    run_rate_experiment, write_gnuplot, write_records_csv, Aggregates, ExperimentConfig,
    ExperimentKind, ExperimentReport, Lambda2Rule, NAggregate, Record, RECORD_COLUMNS,
};
pub use metrics::{frobenius_error, support_matches};
