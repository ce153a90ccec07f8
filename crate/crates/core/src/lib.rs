//! Photocount noise statistics of light transmitted through, or spontaneously
//! emitted by, an amplifying disordered slab below the random-laser threshold.
//!
//! The analytic layers ([`coefficients`], [`correlations`], [`statistics`]) are
//! generic over the scalar type; [`montecarlo`] and [`spectroscopy`] work in
//! `f64`. Concrete double-precision aliases are exported at the crate root.

pub mod branch;
pub mod coefficients;
pub mod config;
pub mod correlations;
pub mod curve;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod scalar;
pub mod spectroscopy;
pub mod statistics;

pub use config::{ConfigError, ModelConfig};
pub use curve::{CurveKind, NoiseCurve};
pub use error::{FitError, ModelError, NumericalError, SimulationError, SweepError};
pub use model::{
    validate, DetectionSetup, DimensionlessBuilder, DynamicsModel, GainModel, ModelInputs,
    SlabGeometry, ValidatedModel, ValidityThresholds, ValidityWarning,
};
pub use scalar::Scalar;

/// Double-precision validated model.
pub type Model = ValidatedModel<f64>;
/// Double-precision mean coefficients.
pub type Coefficients = coefficients::MeanCoefficients<f64>;
