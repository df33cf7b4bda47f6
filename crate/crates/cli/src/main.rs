use std::process::ExitCode;

use clap::Parser;
use fplab_cli::commands::{execute, Cli};

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fplab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
