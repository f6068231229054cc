//! Command-line front end for `mpov-core`: a TOML-driven scenario runner
//! and one subcommand per operation.
//!
//! Exit statuses: 0 success, 1 usage, 2 validation, 3 numerical guard,
//! 4 I/O.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod scenario;
pub mod scenarios;
pub mod units;

pub use commands::run_cli;
pub use error::{CliError, CliResult};
