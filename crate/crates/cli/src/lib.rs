//! Experiment harness around `rl-lab-core`: run configuration, seeded
//! training with CSV output, seed aggregation, SVG plots, KL asymmetry grids
//! and the `verify` self-check suites.

pub mod config;
pub mod curves;
pub mod diag;
pub mod error;
pub mod plot;
pub mod train;
pub mod verify;

pub use error::{CliError, CliResult};
