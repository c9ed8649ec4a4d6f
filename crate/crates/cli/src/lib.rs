//! `ktram` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or file error, 3 invariant
//! or limit violation. Errors go to stderr prefixed with `ktram: error:`.

pub mod args;
mod commands;
pub mod settings;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

use ktram::bench::{BenchError, DataError};
use ktram::device::DeviceError;
use ktram::ktcore::PersistError;
use ktram::learners::LearnError;
use ktram::CoreError;

pub use args::Cli;
pub use settings::{Settings, SEED_ENV};

pub const ERROR_PREFIX: &str = "ktram: error:";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<PersistError> for CliError {
    fn from(e: PersistError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DeviceError> for CliError {
    fn from(e: DeviceError) -> Self {
        match e {
            DeviceError::PresetFile(_)
            | DeviceError::UnknownVariant(_)
            | DeviceError::UnknownMode(_) => CliError::Data(e.to_string()),
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Invariant(e.to_string())
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::EmptySpikes
            | LearnError::InputOutOfRange { .. }
            | LearnError::NoInputs
            | LearnError::Header(_)
            | LearnError::Persist(_) => CliError::Data(e.to_string()),
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Sample { index, source } => match CliError::from(source) {
                CliError::Data(m) => CliError::Data(format!("sample {index}: {m}")),
                CliError::Invariant(m) => CliError::Invariant(format!("sample {index}: {m}")),
                usage => usage,
            },
            BenchError::Encoder(_) | BenchError::Schedule(_) => CliError::Invariant(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Reports go to stdout, errors to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("{ERROR_PREFIX} {first}");
            for line in rendered.lines().skip(1) {
                eprintln!("{line}");
            }
            return 1;
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let mut stdout = std::io::stdout().lock();
    match commands::dispatch(&cli, env_seed, &mut stdout) {
        Ok(()) => {
            let _ = stdout.flush();
            0
        }
        Err(e) => {
            let _ = stdout.flush();
            eprintln!("{ERROR_PREFIX} {e}");
            e.exit_code()
        }
    }
}
