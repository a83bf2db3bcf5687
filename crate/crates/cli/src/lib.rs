//! Command implementations behind the `samlab` binary.

pub mod commands;
pub mod config;
pub mod setup;

use std::path::PathBuf;

use config::ConfigError;

/// Failure of a command, classified for the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] samlab::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical aborts, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(samlab::Error::Argument(_)) => 2,
            CliError::Run(samlab::Error::NonFinite { .. } | samlab::Error::Numerical(_)) => 3,
            CliError::Run(_) => 1,
        }
    }
}

/// Global overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut config::ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.model.seed = seed;
            cfg.optimizer.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
    }
}
