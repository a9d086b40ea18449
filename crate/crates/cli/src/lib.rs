// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end: CSV ingest, subcommands and output documents.

pub mod args;
pub mod commands;
pub mod error;
pub mod ingest;
pub mod output;

pub use args::Cli;
pub use commands::run;
pub use error::{CliError, Result};
