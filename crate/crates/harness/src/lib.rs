//! Experiment orchestration for the landscape laboratory: configs, seeded
//! parallel sweeps with resumable on-disk results, figure-data panels and
//! the verification suite behind the `vqa-lab` binary.

pub mod config;
pub mod error;
pub mod runner;
pub mod summarize;
pub mod verify;

pub use config::{ExperimentConfig, ExperimentKind, Sweep};
pub use error::HarnessError;
pub use runner::{run_experiment, RunOptions, RunSummary};
pub use summarize::summarize;
