//! Experiment harness for `spikeloop`: configuration, seeded repetitions,
//! summaries and output files.

pub mod config;
pub mod emit;
pub mod error;
pub mod experiments;
pub mod logistic;
pub mod record;
pub mod seeds;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use record::{ExperimentResult, Record, SummaryRow};
