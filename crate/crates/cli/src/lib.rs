//! Command-line front end: job configuration, file formats and the job runner.
//!
//! The `maxsurf` binary is a thin clap layer over [`run::run`]; tests drive the same
//! entry point with a [`JobConfig`] built in code.

pub mod config;
pub mod error;
pub mod files;
pub mod report;
pub mod run;

pub use config::{Command, Format, JobConfig};
pub use error::{CliError, Result};
pub use files::parse_loop_file;
pub use run::{run, RunOutcome};
