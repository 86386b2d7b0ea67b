//! Experiment harness around `kpsearch-core`: configuration, repeated seeded
//! runs, run files, comparisons, explanations and archive replay.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod seeds;

pub use error::{CliError, CliResult};
