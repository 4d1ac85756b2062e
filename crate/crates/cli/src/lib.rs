//! Command-line front end for the wave/HMM convergence studies.
//!
//! The binary `wavehmm` is a thin wrapper around [`run`]; everything it does
//! is reachable from here so it can be tested without spawning processes.

pub mod app;
pub mod config;
pub mod output;
pub mod plot;
pub mod selftest;

use std::path::PathBuf;

pub use app::{run, Cli};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config keys or values.
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] wavehmm::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 1 usage (including unreadable or unwritable paths), 2 numerical
    /// failure, 3 divergence the study does not tolerate.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Core(wavehmm::Error::Diverged { .. }) => 3,
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::Core(_) => 1,
            CliError::Failed(_) => 2,
        }
    }
}
