//! File formats, dataset IO and the command-line front end for
//! `warplut-core`.

pub mod cache;
pub mod checkpoint;
pub mod cifar;
pub mod commands;
pub mod config;
pub mod metrics;
pub mod netlist_io;
pub mod selftest;

pub use warplut_core as core;

/// Failure of a subcommand, carrying its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) | CliError::Data(_) => 2,
            CliError::Checkpoint(_) => 3,
        }
    }
}
