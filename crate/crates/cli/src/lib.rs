//! Library side of the `sandbox` binary: configuration loading, sweeps and
//! output files.

pub mod config;
pub mod output;
pub mod sweep;

use transit_sandbox::error::SandboxError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("run failed: {0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 3,
        }
    }
}

impl From<SandboxError> for CliError {
    fn from(e: SandboxError) -> Self {
        match e {
            SandboxError::InvalidParameter { .. } | SandboxError::DemandParse { .. } | SandboxError::DemandGeneration(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.to_string())
    }
}
