use std::process::ExitCode;

use clap::Parser;
use netlogit_cli::{execute, init_logging, Cli};

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("netlogit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
