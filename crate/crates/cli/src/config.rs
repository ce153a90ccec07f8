//! Run configuration: the model sections plus one optional section per
//! command. Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use specklamp::config::{
    DetectionConfig, DynamicsConfig, GainConfig, GeometryConfig, ThresholdsConfig,
};
use specklamp::montecarlo::McOptions;
use specklamp::spectroscopy::FitOptions;
use specklamp::statistics::{log_grid, DynamicsMode, NoiseMode};
use specklamp::{ConfigError, CurveKind, Model, ModelConfig};

use crate::error::CliError;

/// Evenly spaced samples, logarithmically when `log` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    #[serde(default)]
    pub log: bool,
}

impl Range {
    pub const fn linear(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n, log: false }
    }

    pub const fn logarithmic(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n, log: true }
    }

    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let ok = self.lo.is_finite()
            && self.hi.is_finite()
            && self.lo <= self.hi
            && self.n >= 1
            && (!self.log || self.lo > 0.0);
        if !ok {
            return Err(CliError::Usage(format!("invalid range {self:?}")));
        }
        if self.n == 1 {
            return Ok(vec![self.lo]);
        }
        if self.log {
            return Ok(log_grid(self.lo, self.hi, self.n));
        }
        let step = (self.hi - self.lo) / (self.n - 1) as f64;
        Ok((0..self.n).map(|i| self.lo + step * i as f64).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoeffsConfig {
    pub x: Range,
}

impl Default for CoeffsConfig {
    fn default() -> Self {
        Self {
            x: Range::linear(0.0, 0.999 * std::f64::consts::PI, 200),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrConfig {
    pub t_over_tc: Range,
}

impl Default for CorrConfig {
    fn default() -> Self {
        Self {
            t_over_tc: Range::logarithmic(1e-3, 1e4, 141),
        }
    }
}

/// Mean-photocount sweep at fixed `n_c`; `g` follows from `N` and `L/ell`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub mode: NoiseMode,
    pub nbc: f64,
    /// `2 pi I_a/(N dw)`, strong-wave sweeps only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux_ratio: Option<f64>,
    pub nb: Range,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VarianceConfig {
    pub mode: DynamicsMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutocorrConfig {
    /// Lags `t/t_c`; defaults to 100 log-spaced points in `[2, 1e4] tau/t_c`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_over_tc: Option<Range>,
    /// Photocount autocorrelation of the incident light.
    pub c_nana: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationKind {
    /// Second moment from sampled `(T, V)` traces against the closed form.
    #[default]
    Oracle,
    /// Poisson counting of sampled intensity, coherent input without emission.
    Semiclassical,
    /// Intensity correlation of sampled speckle against `|g1|^2`.
    Siegert,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub kind: SimulationKind,
    pub realizations: usize,
    pub steps: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rel_error: Option<f64>,
    pub mode: DynamicsMode,
    /// Lags in samples for the Siegert check.
    pub lags: Vec<usize>,
    /// Number of intensity traces written to the binary cache.
    pub cache_traces: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let mc = McOptions::default();
        Self {
            kind: SimulationKind::default(),
            realizations: mc.realizations,
            steps: mc.steps,
            seed: mc.seed,
            max_rel_error: mc.max_rel_error,
            mode: mc.mode,
            lags: vec![0, 16, 64, 128, 256],
            cache_traces: 0,
        }
    }
}

impl SimulationConfig {
    pub fn options(&self) -> McOptions {
        McOptions {
            realizations: self.realizations,
            seed: self.seed,
            steps: self.steps,
            max_rel_error: self.max_rel_error,
            mode: self.mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub kind: CurveKind,
    /// CSV with header `abscissa,ordinate[,sigma]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<PathBuf>,
    /// Fit `L/L_a` too (autocorrelation curves); `gain.x` is the start.
    pub fit_x: bool,
    pub options: FitOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            kind: CurveKind::Variance,
            curve: None,
            fit_x: false,
            options: FitOptions::default(),
        }
    }
}

fn default_geometry() -> GeometryConfig {
    GeometryConfig {
        thickness_over_ell: 100.0,
        modes: 7500,
    }
}

fn default_gain() -> GainConfig {
    GainConfig { x: 1.0, eta: -1.0 }
}

fn default_detection() -> DetectionConfig {
    DetectionConfig {
        tau_over_tc: 10.0,
        domega_tc: 1000.0,
        ia: 100.0,
        qa: 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_geometry")]
    pub geometry: GeometryConfig,
    #[serde(default = "default_gain")]
    pub gain: GainConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default = "default_detection")]
    pub detection: DetectionConfig,
    #[serde(default)]
    pub thresholds: ThresholdsConfig,
    #[serde(default)]
    pub coeffs: CoeffsConfig,
    #[serde(default)]
    pub corr: CorrConfig,
    #[serde(default)]
    pub variance: VarianceConfig,
    #[serde(default)]
    pub autocorr: AutocorrConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub fit: FitConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every section has a default")
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()).into())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            geometry: self.geometry,
            gain: self.gain,
            dynamics: self.dynamics,
            detection: self.detection,
            thresholds: self.thresholds,
        }
    }

    pub fn model(&self) -> Result<Model, CliError> {
        Ok(self.model_config().model()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_reference_point() {
        let c = RunConfig::default();
        let m = c.model().unwrap();
        assert!((m.g() - 100.0).abs() < 1e-12);
        assert_eq!(c.simulation.realizations, 10_000);
    }

    #[test]
    fn unknown_keys_fail_at_any_depth() {
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"simulation": {"seeds": 1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"fit": {"options": {"tol": 1}}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"coeffs": {"x": {"lo": 0, "hi": 1, "n": 3, "step": 1}}}"#).is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(Range::linear(0.0, 1.0, 3).points().unwrap(), vec![0.0, 0.5, 1.0]);
        let l = Range::logarithmic(1.0, 100.0, 3).points().unwrap();
        assert!((l[1] - 10.0).abs() < 1e-12);
        assert!(Range::logarithmic(0.0, 1.0, 3).points().is_err());
        assert!(Range::linear(1.0, 0.0, 3).points().is_err());
    }
}
