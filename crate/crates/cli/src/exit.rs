//! Errors of the front end and the process exit code each maps to.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Engine(#[from] oocsvd::Error),
    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

pub type CliResult<T> = Result<T, CliError>;

pub mod code {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const BUDGET: i32 = 4;
    pub const IO: i32 = 5;
    pub const NO_PLAN: i32 = 6;
    pub const CONFIG_MISMATCH: i32 = 7;
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use oocsvd::Error as E;
        match self {
            CliError::Usage(_) => code::USAGE,
            CliError::Io { .. } => code::IO,
            CliError::Engine(e) => match e {
                E::InvalidConfig(_) | E::InvalidShape { .. } => code::USAGE,
                E::Parse { .. } | E::UnsupportedFormat(_) => code::PARSE,
                E::BudgetInfeasible(_) => code::BUDGET,
                E::Io { .. } | E::BlockAbsent { .. } | E::BlockCorrupt { .. } => code::IO,
                E::NoPlan(_) => code::NO_PLAN,
                E::ConfigMismatch { .. } => code::CONFIG_MISMATCH,
                _ => code::FAILURE,
            },
        }
    }
}
