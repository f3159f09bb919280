//! Configuration-driven runner for the path-sum and oracle engines.

pub mod commands;
pub mod config;
pub mod engines;
pub mod output;
pub mod verify;

use std::path::PathBuf;

use fvheat_core::FvError;
use thiserror::Error;

pub use config::{ConfigError, RunConfig, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Engine(#[from] FvError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("verification failed: {0}")]
    VerifyFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Engine(FvError::PathBudget { .. } | FvError::DimensionCap { .. }) => EXIT_BUDGET,
            CliError::Engine(FvError::FockLeakage { .. }) => EXIT_CONFIG,
            CliError::Engine(_) | CliError::Io { .. } | CliError::VerifyFailed(_) => EXIT_FAILED,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub budget: Option<u64>,
    pub order: Option<usize>,
}

pub fn load_scenario(path: &std::path::Path, overrides: &Overrides) -> CliResult<Scenario> {
    let (cfg, text) = RunConfig::load(path)?;
    let mut scn = cfg.resolve(&text)?;
    if let Some(b) = overrides.budget {
        scn.budget = b as u128;
    }
    if let Some(o) = overrides.order {
        scn.order = o;
    }
    if overrides.out.is_some() {
        scn.out = overrides.out.clone();
    }
    Ok(scn)
}
