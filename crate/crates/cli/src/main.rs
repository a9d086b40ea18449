// SPDX-License-Identifier: MIT OR Apache-2.0

use std::process::ExitCode;

use bayescpd_cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bayescpd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
