use thiserror::Error;

/// Hard violations of the model's physical invariants.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("threshold exceeded: L/L_a = {x} must stay below pi")]
    ThresholdExceeded { x: f64 },
    #[error("not diffusive: mean free path {ell} must be smaller than thickness {thickness}")]
    NotDiffusive { ell: f64, thickness: f64 },
    #[error("not amplifying: Bose-Einstein factor eta = {eta} must be <= 0")]
    NotAmplifying { eta: f64 },
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("{} invariant violations: {}", .0.len(), join(.0))]
    Violations(Vec<ModelError>),
}

fn join(errs: &[ModelError]) -> String {
    errs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Failures of the numerical and statistical layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericalError {
    #[error(
        "quadrature did not converge: estimate {estimate:e}, error {error:e} after {evaluations} evaluations"
    )]
    NumericalFailure {
        estimate: f64,
        error: f64,
        evaluations: usize,
    },
    #[error("no light reaches the detector: mean photocount is zero")]
    DegenerateNoLight,
    #[error("photocount windows overlap: t/t_c = {t_over_tc} must exceed tau/t_c = {tau_over_tc}")]
    WindowOverlap { t_over_tc: f64, tau_over_tc: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Failures of the stochastic layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("covariance is not positive semidefinite on the grid: min eigenvalue {min_eigenvalue:e} (scale {scale:e})")]
    SynthesisError { min_eigenvalue: f64, scale: f64 },
    #[error("precision not reached: achieved relative standard error {achieved:e}, requested {requested:e}")]
    PrecisionNotReached { achieved: f64, requested: f64 },
    #[error("invalid simulation setup: {0}")]
    InvalidSetup(String),
    #[error(transparent)]
    Numerical(#[from] NumericalError),
    #[error("trace cache: {0}")]
    Cache(String),
}

/// Failures of the inverse problem.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("fit did not converge after {iterations} iterations (residual {residual:e})")]
    FitFailed {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },
    #[error("invalid noise curve: {0}")]
    InvalidCurve(String),
    #[error(transparent)]
    Numerical(#[from] NumericalError),
}

/// Failures of sweeps that both build models and evaluate them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerical(#[from] NumericalError),
}
