//! Synthetic sparse-regression experiments on diagonal linear networks.

pub mod checks;
pub mod config;
pub mod data;
pub mod run;

pub use config::{ExperimentConfig, GridEntry, MethodTag, TrainSettings};
pub use data::{generate_sparse_regression, init_dln_weights, test_loss, GroundTruth};
pub use run::{run_experiment, sweep, RunRecord};
