use thiserror::Error;

pub type Result<T, E = SandboxError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SandboxError {
    /// A parameter breaks its invariant. `notation` is the symbol used in the
    /// configuration file (for example `lambda` or `zeta_w`).
    #[error("invalid parameter {name} ({notation}): {reason}")]
    InvalidParameter {
        name: &'static str,
        notation: &'static str,
        reason: String,
    },
    #[error("demand generation failed: {0}")]
    DemandGeneration(String),
    #[error("demand file line {line}: {reason}")]
    DemandParse { line: u64, reason: String },
    #[error("audit failed: {0}")]
    Audit(String),
    #[error("reports were produced from different demand sets ({0} vs {1})")]
    FingerprintMismatch(String, String),
    #[error("simulation did not drain within {0} s after the demand window")]
    DrainTimeout(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SandboxError {
    pub(crate) fn invalid(name: &'static str, notation: &'static str, reason: impl Into<String>) -> Self {
        SandboxError::InvalidParameter {
            name,
            notation,
            reason: reason.into(),
        }
    }
}
