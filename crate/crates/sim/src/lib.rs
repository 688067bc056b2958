//! Experiment runner, file outputs and command line for `lipdelay-core`.

pub mod cli;
pub mod config;
pub mod export;
pub mod grid;
pub mod suite;

use std::io;
use std::path::{Path, PathBuf};

use lipdelay_core::{ConfigError, ContractError};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    /// Bad file contents or parameter values; reported as a usage error.
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error("{0}")]
    Failed(String),
}

impl SimError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        SimError::Io { path: path.to_path_buf(), source }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            SimError::Config(_) => "config",
            SimError::Io { .. } => "io",
            SimError::Contract(_) => "contract",
            SimError::Failed(_) => "failed",
        }
    }
}

impl From<ConfigError> for SimError {
    fn from(e: ConfigError) -> Self {
        SimError::Config(e.to_string())
    }
}

impl From<lipdelay_core::Error> for SimError {
    fn from(e: lipdelay_core::Error) -> Self {
        match e {
            lipdelay_core::Error::Config(c) => c.into(),
            lipdelay_core::Error::Contract(c) => c.into(),
        }
    }
}
