//! Command-line front end for the `gasjitl` forecasting toolkit.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod report;

pub use error::{CliError, CliResult};
