//! Experiment harness: file formats, reports and the command implementations
//! behind the `failaware` binary.

pub mod binfmt;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod io;
pub mod plot;
pub mod report;

pub use error::{CliError, CliResult};
