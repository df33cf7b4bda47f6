//! Configuration, orchestration and persistence for `fplab` runs.
//!
//! A run is one TOML document ([`config::RunConfig`]); [`pipeline`] executes it
//! on a worker pool and [`writer`] lays out the run directory. Exit codes:
//! 0 success, 1 assertion failure, 2 configuration error, 3 computation failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod writer;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
