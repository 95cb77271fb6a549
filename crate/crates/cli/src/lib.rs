//! Configuration, presets and execution behind the `fredkin` binary.

use std::path::Path;

pub mod config;
pub mod manifest;
pub mod presets;
pub mod run;

pub use config::{load_config, parse_str, ExperimentConfig};
pub use run::{run, RunReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical diagnostic failed: {0}")]
    Diagnostic(String),

    #[error(transparent)]
    Core(#[from] fredkin_core::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Internal(format!("{}: {e}", path.display()))
    }

    /// 2 for configuration problems, 3 for failed numerical checks, 4 otherwise.
    pub fn exit_code(&self) -> i32 {
        use fredkin_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Diagnostic(_) => 3,
            CliError::Core(E::Diagnostic(_) | E::StepSize(_) | E::Truncation { .. }) => 3,
            CliError::Core(E::InvalidParameter(_) | E::SingularFrame(_) | E::SingularCondition) => 2,
            CliError::Core(_) | CliError::Internal(_) => 4,
        }
    }
}
