//! Experiment harness: configuration, Monte Carlo runs, sweeps, planner tables and the
//! acceptance selftest.

pub mod config;
pub mod plan;
pub mod presets;
pub mod report;
pub mod runner;
pub mod selftest;
pub mod sweep;

pub use config::{Mode, RunConfig};
pub use report::RunReport;
