//! Domain types and parameter validation.
//!
//! Every downstream formula is written in dimensionless variables: the gain
//! ratio `x = L/L_a`, the slab ratio `a = ell/L`, the mode count `N`, the
//! Bose-Einstein factor `eta` and times measured in units of the
//! transmission correlation time `t_c`. Physical inputs are converted once,
//! here, and frozen inside [`ValidatedModel`].

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::scalar::Scalar;

/// Slab of thickness `L` filled with a diffusive medium of mean free path `ell`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabGeometry<T> {
    pub thickness: T,
    pub mean_free_path: T,
    /// Transverse mode count per side, `N = k^2 A / 2 pi`.
    pub modes: u64,
}

impl<T: Scalar> SlabGeometry<T> {
    /// Geometry with unit mean free path and thickness `L/ell`.
    pub fn from_ratio(thickness_over_ell: T, modes: u64) -> Self {
        Self {
            thickness: thickness_over_ell,
            mean_free_path: T::one(),
            modes,
        }
    }

    /// `a = ell / L`.
    pub fn ratio(&self) -> T {
        self.mean_free_path / self.thickness
    }

    /// Passive dimensionless conductance `g = (4/3) N ell / L`.
    pub fn conductance(&self) -> T {
        T::lit(4.0 / 3.0) * T::lit(self.modes as f64) * self.ratio()
    }
}

/// Uniform gain below threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainModel<T> {
    /// `x = L / L_a` with `L_a = sqrt(ell ell_a / 3)`.
    pub x: T,
    /// Bose-Einstein factor at the carrier frequency; negative in an amplifier.
    pub eta: T,
}

impl<T: Scalar> GainModel<T> {
    pub fn new(x: T, eta: T) -> Self {
        Self { x, eta }
    }

    /// Threshold margin `1 - x/pi`.
    pub fn threshold_margin(&self) -> T {
        T::one() - self.x / T::PI()
    }
}

/// Brownian scatterer dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsModel<T> {
    /// Single-scattering decorrelation time `1/(4 k^2 D_B)`.
    pub t0: T,
    /// Transmission correlation time `(2/3) t0 (ell/L)^2`.
    pub tc: T,
    pub diffusion_coefficient: Option<T>,
}

impl<T: Scalar> DynamicsModel<T> {
    pub fn from_t0(t0: T, ratio: T) -> Self {
        Self {
            t0,
            tc: T::lit(2.0 / 3.0) * t0 * ratio * ratio,
            diffusion_coefficient: None,
        }
    }

    pub fn from_tc(tc: T, ratio: T) -> Self {
        Self {
            t0: T::lit(1.5) * tc / (ratio * ratio),
            tc,
            diffusion_coefficient: None,
        }
    }

    /// Dynamics of point scatterers with Brownian diffusion coefficient
    /// `d_b` probed at wavenumber `k`.
    pub fn brownian(d_b: T, wavenumber: T, ratio: T) -> Self {
        let t0 = T::one() / (T::lit(4.0) * wavenumber * wavenumber * d_b);
        Self {
            diffusion_coefficient: Some(d_b),
            ..Self::from_t0(t0, ratio)
        }
    }

    /// `gamma^2(t) ell^2 = (3/2) t / t0`.
    pub fn gamma2_ell2(&self, t: T) -> T {
        T::lit(1.5) * t / self.t0
    }
}

/// Photodetection setup and the state of the incident light.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionSetup<T> {
    /// Filter bandwidth (rad per time unit).
    pub domega: T,
    /// Sampling time.
    pub tau: T,
    /// Incident photon flux.
    pub ia: T,
    /// Mandel parameter of the incident light; zero for a coherent state.
    pub qa: T,
}

impl<T: Scalar> DetectionSetup<T> {
    /// Mean incident photocount over one window, `I_a tau`.
    pub fn na(&self) -> T {
        self.ia * self.tau
    }

    pub fn tau_domega(&self) -> T {
        self.tau * self.domega
    }

    pub fn is_coherent(&self) -> bool {
        self.qa == T::zero()
    }

    /// Second-order correlator of the incident light, `I_a^2 (1 + Q_a/n_a)`.
    pub fn fa(&self) -> T {
        let na = self.na();
        if na == T::zero() {
            return T::zero();
        }
        self.ia * self.ia * (T::one() + self.qa / na)
    }
}

/// Configurable soft bounds for the asymptotic validity conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityThresholds<T> {
    /// Warn when `Delta sqrt(g)` falls below this.
    pub delta_sqrt_g: T,
    /// Warn when `tau Delta omega` falls below this.
    pub tau_domega: T,
}

impl<T: Scalar> Default for ValidityThresholds<T> {
    fn default() -> Self {
        Self {
            delta_sqrt_g: T::lit(3.0),
            tau_domega: T::lit(100.0),
        }
    }
}

/// Non-fatal departures from the asymptotic regime the formulas assume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ValidityWarning {
    /// `g <= 1`: close to or beyond Anderson localization.
    Localization { g: f64 },
    /// `Delta sqrt(g)` below the configured factor.
    NearThreshold { delta_sqrt_g: f64 },
    /// `tau Delta omega` below the configured factor.
    ShortSampling { tau_domega: f64 },
}

/// Raw model inputs, before validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelInputs<T> {
    pub geometry: SlabGeometry<T>,
    pub gain: GainModel<T>,
    pub dynamics: DynamicsModel<T>,
    pub detection: DetectionSetup<T>,
    pub thresholds: ValidityThresholds<T>,
}

/// Immutable, validated model with frozen derived quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedModel<T> {
    inputs: ModelInputs<T>,
    a: T,
    tc: T,
    delta: T,
    g: T,
    warnings: Vec<ValidityWarning>,
}

fn check_finite_positive<T: Scalar>(
    name: &'static str,
    v: T,
    errs: &mut Vec<ModelError>,
) -> bool {
    if !v.is_finite() || v <= T::zero() {
        errs.push(ModelError::InvalidParameter {
            name,
            value: v.as_f64(),
            reason: "must be finite and positive",
        });
        return false;
    }
    true
}

/// Checks every hard invariant and records the soft ones as warnings.
pub fn validate<T: Scalar>(inputs: ModelInputs<T>) -> Result<ValidatedModel<T>, ModelError> {
    let mut errs = Vec::new();
    let ModelInputs {
        geometry,
        gain,
        dynamics,
        detection,
        thresholds,
    } = inputs;

    let geo_ok = check_finite_positive("thickness", geometry.thickness, &mut errs)
        & check_finite_positive("mean_free_path", geometry.mean_free_path, &mut errs);
    if geo_ok && geometry.mean_free_path >= geometry.thickness {
        errs.push(ModelError::NotDiffusive {
            ell: geometry.mean_free_path.as_f64(),
            thickness: geometry.thickness.as_f64(),
        });
    }
    if geometry.modes == 0 {
        errs.push(ModelError::InvalidParameter {
            name: "N",
            value: 0.0,
            reason: "must be at least 1",
        });
    }

    if !gain.x.is_finite() || gain.x < T::zero() {
        errs.push(ModelError::InvalidParameter {
            name: "x",
            value: gain.x.as_f64(),
            reason: "must be finite and non-negative",
        });
    } else if gain.x >= T::PI() {
        errs.push(ModelError::ThresholdExceeded { x: gain.x.as_f64() });
    }
    if !gain.eta.is_finite() {
        errs.push(ModelError::InvalidParameter {
            name: "eta",
            value: gain.eta.as_f64(),
            reason: "must be finite",
        });
    } else if gain.eta > T::zero() {
        errs.push(ModelError::NotAmplifying {
            eta: gain.eta.as_f64(),
        });
    }

    check_finite_positive("t0", dynamics.t0, &mut errs);
    check_finite_positive("tc", dynamics.tc, &mut errs);
    check_finite_positive("tau", detection.tau, &mut errs);
    check_finite_positive("domega", detection.domega, &mut errs);
    if !detection.ia.is_finite() || detection.ia < T::zero() {
        errs.push(ModelError::InvalidParameter {
            name: "Ia",
            value: detection.ia.as_f64(),
            reason: "must be finite and non-negative",
        });
    }
    if !detection.qa.is_finite() || detection.qa < -T::one() {
        errs.push(ModelError::InvalidParameter {
            name: "Qa",
            value: detection.qa.as_f64(),
            reason: "Mandel parameter must be finite and >= -1",
        });
    }

    match errs.len() {
        0 => {}
        1 => return Err(errs.pop().unwrap()),
        _ => return Err(ModelError::Violations(errs)),
    }

    let a = geometry.ratio();
    let tc = dynamics.tc;
    let g = geometry.conductance();
    let delta = gain.threshold_margin();

    let mut warnings = Vec::new();
    if g <= T::one() {
        warnings.push(ValidityWarning::Localization { g: g.as_f64() });
    }
    let dsg = delta * g.sqrt();
    if dsg < thresholds.delta_sqrt_g {
        warnings.push(ValidityWarning::NearThreshold {
            delta_sqrt_g: dsg.as_f64(),
        });
    }
    let tdw = detection.tau_domega();
    if tdw < thresholds.tau_domega {
        warnings.push(ValidityWarning::ShortSampling {
            tau_domega: tdw.as_f64(),
        });
    }
    for w in &warnings {
        log::debug!("validity: {w:?}");
    }

    Ok(ValidatedModel {
        inputs,
        a,
        tc,
        delta,
        g,
        warnings,
    })
}

impl<T: Scalar> ValidatedModel<T> {
    pub fn inputs(&self) -> ModelInputs<T> {
        self.inputs
    }

    /// Re-runs validation on the stored inputs.
    pub fn revalidate(&self) -> Result<Self, ModelError> {
        validate(self.inputs)
    }

    pub fn geometry(&self) -> &SlabGeometry<T> {
        &self.inputs.geometry
    }

    pub fn gain(&self) -> &GainModel<T> {
        &self.inputs.gain
    }

    pub fn dynamics(&self) -> &DynamicsModel<T> {
        &self.inputs.dynamics
    }

    pub fn detection(&self) -> &DetectionSetup<T> {
        &self.inputs.detection
    }

    pub fn x(&self) -> T {
        self.inputs.gain.x
    }

    pub fn eta(&self) -> T {
        self.inputs.gain.eta
    }

    pub fn modes(&self) -> u64 {
        self.inputs.geometry.modes
    }

    /// `ell / L`.
    pub fn a(&self) -> T {
        self.a
    }

    pub fn tc(&self) -> T {
        self.tc
    }

    /// Threshold margin `1 - x/pi`.
    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn g(&self) -> T {
        self.g
    }

    pub fn tau_over_tc(&self) -> T {
        self.inputs.detection.tau / self.tc
    }

    pub fn warnings(&self) -> &[ValidityWarning] {
        &self.warnings
    }

    /// Copy of the model with a different detection setup, revalidated.
    pub fn with_detection(&self, detection: DetectionSetup<T>) -> Result<Self, ModelError> {
        validate(ModelInputs {
            detection,
            ..self.inputs
        })
    }

    /// Copy of the model with a different gain, revalidated.
    pub fn with_gain(&self, gain: GainModel<T>) -> Result<Self, ModelError> {
        validate(ModelInputs { gain, ..self.inputs })
    }
}

/// Convenience builder in dimensionless units (`ell = 1`, `t_c = 1`).
#[derive(Debug, Clone, Copy)]
pub struct DimensionlessBuilder<T> {
    pub thickness_over_ell: T,
    pub modes: u64,
    pub x: T,
    pub eta: T,
    pub tau_over_tc: T,
    pub domega_tc: T,
    pub ia_tc: T,
    pub qa: T,
}

impl<T: Scalar> DimensionlessBuilder<T> {
    pub fn inputs(&self) -> ModelInputs<T> {
        let geometry = SlabGeometry::from_ratio(self.thickness_over_ell, self.modes);
        let dynamics = DynamicsModel::from_tc(T::one(), geometry.ratio());
        ModelInputs {
            geometry,
            gain: GainModel::new(self.x, self.eta),
            dynamics,
            detection: DetectionSetup {
                domega: self.domega_tc,
                tau: self.tau_over_tc,
                ia: self.ia_tc,
                qa: self.qa,
            },
            thresholds: ValidityThresholds::default(),
        }
    }

    pub fn build(&self) -> Result<ValidatedModel<T>, ModelError> {
        validate(self.inputs())
    }
}
