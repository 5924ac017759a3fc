//! Experiment orchestration on top of the `critgraph` kernels: flat-text
//! configuration, named experiments behind a common trait, CSV/JSON
//! reporting and a fast self-test suite.

pub mod config;
pub mod experiments;
pub mod report;
pub mod selftest;

pub use config::ExperimentConfig;
pub use experiments::{find_experiment, registry, Experiment};
pub use report::{CriterionResult, ExperimentReport};
