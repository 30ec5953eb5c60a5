//! Command-line front end for the netlogit toolkit.

mod args;
mod commands;
mod config;
mod output;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;

/// Failure classes, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<netlogit::Error> for CliError {
    fn from(e: netlogit::Error) -> Self {
        match e {
            netlogit::Error::Io(msg) => CliError::Config(msg),
            e if e.is_input_error() => CliError::Config(e.to_string()),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

/// Installs the logger; level comes from `NETLOGIT_LOG` (default `warn`).
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("NETLOGIT_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    commands::dispatch(cli)
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Config(e.to_string()))?;
    execute(&cli)
}
