//! JSON model configuration.
//!
//! Times are in the units of `dynamics.tc` (or `dynamics.t0`); `Ia` is a flux
//! per time unit. `detection.tau_over_tc` and `detection.domega_tc` are
//! dimensionless and are converted with the resolved `t_c`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate, DetectionSetup, DynamicsModel, GainModel, ModelInputs, SlabGeometry,
    ValidityThresholds,
};
use crate::{Model, ModelError};

/// Version of the configuration and output schema.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("configuration: {0}")]
    Parse(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(rename = "L_over_ell")]
    pub thickness_over_ell: f64,
    #[serde(rename = "N")]
    pub modes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainConfig {
    pub x: f64,
    pub eta: f64,
}

/// Exactly one of `tc` and `t0`; `tc = 1` when the section is absent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    pub tau_over_tc: f64,
    pub domega_tc: f64,
    #[serde(rename = "Ia")]
    pub ia: f64,
    /// Coherent light when absent.
    #[serde(rename = "Qa", default)]
    pub qa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdsConfig {
    pub delta_sqrt_g: f64,
    pub tau_domega: f64,
}

impl Default for ThresholdsConfig {
    fn default() -> Self {
        let t = ValidityThresholds::<f64>::default();
        Self {
            delta_sqrt_g: t.delta_sqrt_g,
            tau_domega: t.tau_domega,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub geometry: GeometryConfig,
    pub gain: GainConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    pub detection: DetectionConfig,
    #[serde(default)]
    pub thresholds: ThresholdsConfig,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn inputs(&self) -> Result<ModelInputs<f64>, ConfigError> {
        let geometry = SlabGeometry::from_ratio(self.geometry.thickness_over_ell, self.geometry.modes);
        let ratio = geometry.ratio();
        let dynamics = match (self.dynamics.tc, self.dynamics.t0) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Parse(
                    "dynamics: give either `tc` or `t0`, not both".into(),
                ))
            }
            (None, Some(t0)) => DynamicsModel::from_t0(t0, ratio),
            (tc, None) => DynamicsModel::from_tc(tc.unwrap_or(1.0), ratio),
        };
        let tc = dynamics.tc;
        let d = &self.detection;
        Ok(ModelInputs {
            geometry,
            gain: GainModel::new(self.gain.x, self.gain.eta),
            dynamics,
            detection: DetectionSetup {
                domega: d.domega_tc / tc,
                tau: d.tau_over_tc * tc,
                ia: d.ia,
                qa: d.qa,
            },
            thresholds: ValidityThresholds {
                delta_sqrt_g: self.thresholds.delta_sqrt_g,
                tau_domega: self.thresholds.tau_domega,
            },
        })
    }

    pub fn model(&self) -> Result<Model, ConfigError> {
        Ok(validate(self.inputs()?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = r#"{
        "geometry": {"L_over_ell": 100, "N": 7500},
        "gain": {"x": 1.0, "eta": -1.0},
        "dynamics": {"tc": 2.0},
        "detection": {"tau_over_tc": 10, "domega_tc": 1000, "Ia": 0.5}
    }"#;

    #[test]
    fn reference_config_resolves() {
        let m = ModelConfig::from_json(REFERENCE).unwrap().model().unwrap();
        assert!((m.g() - 100.0).abs() < 1e-12);
        assert!((m.tau_over_tc() - 10.0).abs() < 1e-12);
        assert!((m.detection().tau_domega() - 1e4).abs() < 1e-9);
        assert_eq!(m.detection().qa, 0.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = REFERENCE.replace("\"eta\"", "\"etta\"");
        assert!(matches!(ModelConfig::from_json(&bad), Err(ConfigError::Parse(_))));
        let bad = REFERENCE.replace("\"tc\": 2.0", "\"tc\": 2.0, \"t0\": 1.0");
        let c = ModelConfig::from_json(&bad).unwrap();
        assert!(c.model().is_err());
    }

    #[test]
    fn threshold_is_a_model_error() {
        let bad = REFERENCE.replace("\"x\": 1.0", "\"x\": 3.2");
        let err = ModelConfig::from_json(&bad).unwrap().model().unwrap_err();
        assert!(matches!(err, ConfigError::Model(ModelError::ThresholdExceeded { .. })));
    }
}
