use specklamp::{ConfigError, FitError, ModelError, NumericalError, SimulationError, SweepError};
use thiserror::Error;

/// Failures of one run, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerical(#[from] NumericalError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("non-finite value in column `{column}` of `{table}`")]
    NonFinite { table: String, column: String },
    #[error("{context}: {message}")]
    Io { context: String, message: String },
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Model(m) => CliError::Model(m),
            SweepError::Numerical(n) => CliError::Numerical(n),
        }
    }
}

impl CliError {
    pub fn io(context: impl Into<String>, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            context: context.into(),
            message: e.to_string(),
        }
    }

    /// 1 for invalid input, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Model(_) | CliError::Io { .. } => 1,
            CliError::Fit(FitError::InvalidCurve(_)) => 1,
            CliError::Simulation(SimulationError::InvalidSetup(_) | SimulationError::Cache(_)) => 1,
            CliError::Numerical(_)
            | CliError::Simulation(_)
            | CliError::Fit(_)
            | CliError::NonFinite { .. } => 2,
        }
    }
}
