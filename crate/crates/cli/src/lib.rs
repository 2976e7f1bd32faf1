//! Command-line pipeline: ingestion, MAP estimation, sampling and reports,
//! each writing plain CSV/JSON or packed binary traces to an output
//! directory.

pub mod commands;
pub mod error;
pub mod settings;
pub mod trace_file;

pub use error::CliError;
pub use settings::{Cli, Command, Opts, Settings};
