//! Front end of the `oocsvd` binary.

pub mod args;
pub mod bytes;
pub mod commands;
pub mod exit;
pub mod profile;

pub use args::Cli;
pub use exit::{CliError, CliResult};
