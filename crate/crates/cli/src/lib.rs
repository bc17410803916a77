//! Library side of the `rlframe` command: run manifests and the subcommand
//! implementations.

pub mod commands;
pub mod manifest;

use thiserror::Error;

pub use manifest::{RunManifest, ManifestError};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: manifest, flags, checkpoint, or an environment that
    /// cannot do what was asked.
    #[error("{0}")]
    Usage(String),
    /// The run started but could not finish.
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}
