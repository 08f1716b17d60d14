//! Data generation, ground truth and replicated experiments for the
//! simulation design.

mod baseline;
mod dgp;
mod experiment;

pub use baseline::LocalLinear;
pub use dgp::DgpConfig;
pub use experiment::{
    derive_seed, run_experiment, run_experiment_with, write_metrics_csv, Arm, BuiltinEstimator, CiMethod,
    EstimatorKind, ExperimentConfig, Interval, MetricsRow, OracleEstimator, ReplicationEstimator,
};
