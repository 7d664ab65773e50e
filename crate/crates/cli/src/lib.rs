//! Seeded experiment runner over the `sqlab` library.

pub mod commands;
pub mod config;
pub mod report;

pub use config::{ExperimentConfig, ExperimentKind, LearnerParams, PolicySpec, TargetKind};
pub use report::{Assertion, Outcome, Report};
