//! Photocount statistics: windowed variances, the general variance
//! composition and its strong-wave and spontaneous-emission limits, regime
//! classification, averaging conventions and the photocount autocorrelation.
//!
//! Writing `k = 2 pi/(tau dw)` and `phi` for the spontaneous-emission share,
//! the normalized variance is
//!
//! ```text
//! delta_b^2 = 1/n_b + k [2 phi (1 - phi)(1 + C_TV(0)) + phi^2 (1 + C_VV(0))]
//!           + (1 - phi)^2 [(1 + Q_a/n_a) d_TT + Q_a/n_a]
//!           + 2 phi (1 - phi) d_TV + phi^2 d_VV
//! ```
//!
//! with `d_XY = (2/tau) int_0^tau (1 - t/tau) C_XY(t) dt`. The interference
//! bracket is the original `phi T_b (2 pi I_a/(N dw)) [...]` with
//! `T_b I_a/N = (1 - phi) n_b/tau` substituted, which stays finite at
//! `phi = 1`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{self, MeanCoefficients};
use crate::correlations::{CorrelationArgs, CorrelationKind};
use crate::error::{ModelError, NumericalError, SweepError};
use crate::model::{DimensionlessBuilder, ValidatedModel};
use crate::quadrature::{self, QuadratureOptions};
use crate::scalar::Scalar;

/// `(2/U) int_0^U (1 - u/U) c(u) du` with `U = tau/t_c` and `c` a function of
/// `t/t_c`.
///
/// The integral is taken in `v = sqrt(u)`, which turns the `1/sqrt(u)`
/// long-time tails into bounded integrands, with breakpoints at powers of 4.
pub fn windowed_variance<T, F>(c: F, tau_over_tc: T) -> Result<T, NumericalError>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    windowed_variance_with(c, tau_over_tc, &QuadratureOptions::for_scalar::<T>())
}

pub fn windowed_variance_with<T, F>(
    c: F,
    tau_over_tc: T,
    opts: &QuadratureOptions,
) -> Result<T, NumericalError>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let big_u = tau_over_tc;
    if !(big_u >= T::zero()) || !big_u.is_finite() {
        return Err(NumericalError::NonFinite("sampling time"));
    }
    if big_u == T::zero() {
        return Ok(c(T::zero()));
    }
    let s = big_u.sqrt();
    let mut pts = vec![T::zero()];
    let mut p = T::one();
    while p < s {
        pts.push(p);
        p = p * T::lit(4.0);
    }
    pts.push(s);
    let r = quadrature::integrate_with_breakpoints(
        |v: T| {
            let u = v * v;
            (T::one() - u / big_u) * c(u) * v
        },
        &pts,
        opts,
    )?;
    Ok(T::lit(4.0) * r.value / big_u)
}

/// Windowed variance of one correlation function at `(x, a, g)`.
pub fn windowed_correlation<T: Scalar>(
    kind: CorrelationKind,
    x: T,
    a: T,
    g: T,
    tau_over_tc: T,
) -> Result<T, NumericalError> {
    let base = CorrelationArgs::new(x, T::zero(), a, g);
    windowed_variance(|u: T| kind.evaluate(&base.with_t_over_tc(u)), tau_over_tc)
}

/// Whether the medium fluctuates during the sampling window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsMode {
    /// Windowed variances from the full time dependence.
    #[default]
    Dynamic,
    /// Quenched medium: every windowed variance is replaced by `C(0)`.
    Static,
}

/// Windowed variances `d_TT`, `d_TV`, `d_VV`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowedDeltas<T> {
    pub tt: T,
    pub tv: T,
    pub vv: T,
}

/// Equal-time correlations weighting the interference terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualTime<T> {
    pub tv: T,
    pub vv: T,
}

/// Weights of the windowed variances in the total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositionWeights<T> {
    /// `(1 - phi)^2 (1 + Q_a/n_a)`.
    pub tt: T,
    /// `2 phi (1 - phi)`.
    pub tv: T,
    /// `phi^2`.
    pub vv: T,
}

/// Term-by-term normalized photocount variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceBreakdown<T> {
    pub nb: T,
    pub phi: T,
    /// `1/n_b`.
    pub shot: T,
    /// Equal-time spontaneous-emission terms of the `1/n_b` bracket.
    pub interference: T,
    /// `(1 - phi)^2 [(1 + Q_a/n_a) d_TT + Q_a/n_a]`.
    pub classical_tt: T,
    /// `2 phi (1 - phi) d_TV`.
    pub cross_tv: T,
    /// `phi^2 d_VV`.
    pub ase_vv: T,
    pub total: T,
    pub weights: CompositionWeights<T>,
    pub deltas: WindowedDeltas<T>,
    pub equal_time: EqualTime<T>,
}

/// Assembles the variance from its ingredients.
///
/// `k = 2 pi/(tau dw)`; `q_over_na = Q_a/n_a`, zero without incident light.
pub fn compose_variance<T: Scalar>(
    nb: T,
    phi: T,
    k: T,
    q_over_na: T,
    equal_time: EqualTime<T>,
    deltas: WindowedDeltas<T>,
) -> VarianceBreakdown<T> {
    let one = T::one();
    let two = T::lit(2.0);
    let psi = one - phi;
    let weights = CompositionWeights {
        tt: psi * psi * (one + q_over_na),
        tv: two * phi * psi,
        vv: phi * phi,
    };
    let shot = one / nb;
    let interference = k * (weights.tv * (one + equal_time.tv) + weights.vv * (one + equal_time.vv));
    let classical_tt = weights.tt * deltas.tt + psi * psi * q_over_na;
    let cross_tv = weights.tv * deltas.tv;
    let ase_vv = weights.vv * deltas.vv;
    VarianceBreakdown {
        nb,
        phi,
        shot,
        interference,
        classical_tt,
        cross_tv,
        ase_vv,
        total: shot + interference + classical_tt + cross_tv + ase_vv,
        weights,
        deltas,
        equal_time,
    }
}

fn deltas_for<T: Scalar>(
    model: &ValidatedModel<T>,
    mode: DynamicsMode,
    need: [bool; 3],
) -> Result<WindowedDeltas<T>, NumericalError> {
    let (x, a, g, u) = (model.x(), model.a(), model.g(), model.tau_over_tc());
    let kinds = [CorrelationKind::TT, CorrelationKind::TV, CorrelationKind::VV];
    let mut out = [T::zero(); 3];
    for i in 0..3 {
        if !need[i] {
            continue;
        }
        out[i] = match mode {
            DynamicsMode::Static => kinds[i].at_zero(x, g),
            DynamicsMode::Dynamic => windowed_correlation(kinds[i], x, a, g, u)?,
        };
    }
    Ok(WindowedDeltas {
        tt: out[0],
        tv: out[1],
        vv: out[2],
    })
}

/// Equal-time correlations of a model.
pub fn equal_time<T: Scalar>(model: &ValidatedModel<T>) -> EqualTime<T> {
    EqualTime {
        tv: CorrelationKind::TV.at_zero(model.x(), model.g()),
        vv: CorrelationKind::VV.at_zero(model.x(), model.g()),
    }
}

/// Normalized photocount variance of a validated model, term by term.
pub fn photocount_variance<T: Scalar>(
    model: &ValidatedModel<T>,
    mode: DynamicsMode,
) -> Result<VarianceBreakdown<T>, NumericalError> {
    let c = MeanCoefficients::compute(model);
    let phi = c.phi()?;
    let det = model.detection();
    let na = det.na();
    let q_over_na = if na > T::zero() { det.qa / na } else { T::zero() };
    let psi = T::one() - phi;
    let need = [psi != T::zero(), phi != T::zero() && psi != T::zero(), phi != T::zero()];
    let deltas = deltas_for(model, mode, need)?;
    let k = T::TAU() / det.tau_domega();
    Ok(compose_variance(c.nb, phi, k, q_over_na, equal_time(model), deltas))
}

/// Strong-incident-wave variance, linear in the spontaneous-emission share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongWaveVariance<T> {
    pub nb: T,
    pub phi: T,
    pub total: T,
    /// `phi` exceeds the 0.1 bound of the linearization.
    pub phi_warning: bool,
    pub deltas: WindowedDeltas<T>,
}

/// Upper `phi` for which the linearized strong-wave form is trusted.
pub const STRONG_WAVE_PHI_LIMIT: f64 = 0.1;

/// `(1/n)[1 - 2 eta V (1 + C_TV(0))] + (2 eta V/T_b)(N dw/(2 pi I_a))(d_TT - d_TV) + d_TT`.
#[allow(clippy::too_many_arguments)]
pub fn strong_wave_from_parts<T: Scalar>(
    nb: T,
    eta: T,
    vb: T,
    tb: T,
    n_domega_over_2pi_ia: T,
    c_tv0: T,
    d_tt: T,
    d_tv: T,
) -> T {
    let two = T::lit(2.0);
    (T::one() - two * eta * vb * (T::one() + c_tv0)) / nb
        + two * eta * vb / tb * n_domega_over_2pi_ia * (d_tt - d_tv)
        + d_tt
}

pub fn strong_wave_variance<T: Scalar>(
    model: &ValidatedModel<T>,
    mode: DynamicsMode,
) -> Result<StrongWaveVariance<T>, NumericalError> {
    let det = model.detection();
    if !(det.ia > T::zero()) {
        return Err(NumericalError::DegenerateNoLight);
    }
    let c = MeanCoefficients::compute(model);
    let phi = c.phi()?;
    let deltas = deltas_for(model, mode, [true, true, false])?;
    let ratio = T::lit(model.modes() as f64) * det.domega / (T::TAU() * det.ia);
    let total = strong_wave_from_parts(
        c.nb,
        model.eta(),
        c.vb,
        c.tb,
        ratio,
        equal_time(model).tv,
        deltas.tt,
        deltas.tv,
    );
    Ok(StrongWaveVariance {
        nb: c.nb,
        phi,
        total,
        phi_warning: phi > T::lit(STRONG_WAVE_PHI_LIMIT),
        deltas,
    })
}

/// Statistics of pure amplified spontaneous emission (no incident light).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AseStatistics<T> {
    /// `-eta V_b tau dw/(2 pi)`.
    pub nb: T,
    /// Mean photocount per correlation time.
    pub nbc: T,
    pub c_vv0: T,
    pub delta_vv: T,
    /// `(1/n)[1 - eta V_b (1 + C_VV(0))] + d_VV`.
    pub variance: T,
    /// Large-`n_b` limit `(8/(3g)) sqrt(n_c/n_b)`.
    pub asymptote: T,
}

/// ASE variance from its ingredients.
pub fn ase_variance_from_parts<T: Scalar>(nb: T, eta: T, vb: T, c_vv0: T, d_vv: T) -> T {
    (T::one() - eta * vb * (T::one() + c_vv0)) / nb + d_vv
}

/// `(8/(3g)) sqrt(n_c/n_b)`.
pub fn ase_asymptote<T: Scalar>(g: T, nbc: T, nb: T) -> T {
    T::lit(8.0) / (T::lit(3.0) * g) * (nbc / nb).sqrt()
}

pub fn ase_statistics<T: Scalar>(
    model: &ValidatedModel<T>,
    mode: DynamicsMode,
) -> Result<AseStatistics<T>, NumericalError> {
    let eta = model.eta();
    let vb = coefficients::mean_ase(model);
    let nb = -eta * vb * model.detection().tau_domega() / T::TAU();
    if !(nb > T::zero()) {
        return Err(NumericalError::DegenerateNoLight);
    }
    let deltas = deltas_for(model, mode, [false, false, true])?;
    let c_vv0 = equal_time(model).vv;
    let nbc = nb / model.tau_over_tc();
    Ok(AseStatistics {
        nb,
        nbc,
        c_vv0,
        delta_vv: deltas.vv,
        variance: ase_variance_from_parts(nb, eta, vb, c_vv0, deltas.vv),
        asymptote: ase_asymptote(model.g(), nbc, nb),
    })
}

/// Variance under the joint and the separate disorder averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConventionComparison<T> {
    pub nb: T,
    /// Joint quantum and disorder average, static strong-wave form.
    pub var_joint: T,
    /// Weak-gain approximation `n + n^2 + 2 eta V n tau dw/(2 pi)`.
    pub var_joint_weak_gain: T,
    /// Coefficient of `n` in the excess term of the joint variance.
    pub excess_joint: T,
    /// Disorder average of the quantum variance, `n - 2 eta V n`.
    pub var_primed: T,
    /// Coefficient of `n` in the excess term of the primed variance.
    pub excess_primed: T,
}

impl<T: Scalar> ConventionComparison<T> {
    /// The two excess coefficients have strictly opposite signs.
    pub fn opposite_signs(&self) -> bool {
        self.excess_joint * self.excess_primed < T::zero()
    }
}

pub fn variance_convention_compare<T: Scalar>(
    model: &ValidatedModel<T>,
) -> Result<ConventionComparison<T>, NumericalError> {
    let sw = strong_wave_variance(model, DynamicsMode::Static)?;
    let c = MeanCoefficients::compute(model);
    let nb = c.nb;
    let two_eta_v = T::lit(2.0) * model.eta() * c.vb;
    let excess_joint = two_eta_v * model.detection().tau_domega() / T::TAU();
    Ok(ConventionComparison {
        nb,
        var_joint: sw.total * nb * nb,
        var_joint_weak_gain: nb + nb * nb + excess_joint * nb,
        excess_joint,
        var_primed: nb - two_eta_v * nb,
        excess_primed: -two_eta_v,
    })
}

/// Which kind of noise curve is being classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    StrongWave,
    Ase,
}

/// Power-law regimes of the normalized variance against mean photocount.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Shot noise dominates, slope -1.
    ShotNoise,
    /// Short-range classical fluctuations averaged by the window, slope -1.
    Classical,
    /// Long-range correlations dominate, slope -1/2.
    LongRange,
}

impl Regime {
    pub fn slope(self) -> f64 {
        match self {
            Regime::ShotNoise | Regime::Classical => -1.0,
            Regime::LongRange => -0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub slope: f64,
    /// Crossover photocounts in increasing order.
    pub crossovers: Vec<f64>,
}

/// Crossover photocounts of a noise curve.
///
/// Strong wave: `1` and `g^2 n_c`. Spontaneous emission: `g` when
/// `n_c > g`, otherwise `g^2/n_c`.
pub fn crossovers(nbc: f64, g: f64, mode: NoiseMode) -> Vec<f64> {
    match mode {
        NoiseMode::StrongWave => vec![1.0, g * g * nbc],
        NoiseMode::Ase => vec![if nbc > g { g } else { g * g / nbc }],
    }
}

pub fn regime_classifier(nb: f64, nbc: f64, g: f64, mode: NoiseMode) -> RegimeReport {
    let crossovers = crossovers(nbc, g, mode);
    let regime = match mode {
        NoiseMode::StrongWave if nb < crossovers[0] => Regime::ShotNoise,
        NoiseMode::StrongWave if nb < crossovers[1] => Regime::Classical,
        NoiseMode::Ase if nb < crossovers[0] => Regime::ShotNoise,
        _ => Regime::LongRange,
    };
    RegimeReport {
        regime,
        slope: regime.slope(),
        crossovers,
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// `n` log-spaced points over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Photocount autocorrelation for non-overlapping windows `t > tau`.
///
/// `c_nana` is the photocount autocorrelation of the incident light, zero
/// for a coherent state.
pub fn photocount_autocorrelation<T: Scalar>(
    model: &ValidatedModel<T>,
    t_over_tc: T,
    c_nana: T,
) -> Result<T, NumericalError> {
    let tau = model.tau_over_tc();
    if !(t_over_tc > tau) {
        return Err(NumericalError::WindowOverlap {
            t_over_tc: t_over_tc.as_f64(),
            tau_over_tc: tau.as_f64(),
        });
    }
    let phi = MeanCoefficients::compute(model).phi()?;
    let args = CorrelationArgs::at_time(model, t_over_tc);
    let psi = T::one() - phi;
    let mut total = T::zero();
    if psi != T::zero() {
        let c_tt = CorrelationKind::TT.evaluate(&args);
        total = total + psi * psi * ((T::one() + c_nana) * c_tt + c_nana);
    }
    if phi != T::zero() && psi != T::zero() {
        total = total + T::lit(2.0) * phi * psi * CorrelationKind::TV.evaluate(&args);
    }
    if phi != T::zero() {
        total = total + phi * phi * CorrelationKind::VV.evaluate(&args);
    }
    Ok(total)
}

/// Strong-wave operating points parameterized by the mean photocount.
///
/// Fixes `L/ell`, `g`, `x`, `eta`, the photocount per correlation time
/// `n_c` and `r = 2 pi I_a/(N dw)`. The sampling time then follows from
/// `tau/t_c = n_b/n_c`, and the bandwidth from the mean photocount
/// `n_b = (tau dw/2 pi)(T_b r - eta V_b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongWaveSweep<T> {
    pub thickness_over_ell: T,
    pub g: T,
    pub x: T,
    pub eta: T,
    pub nbc: T,
    pub flux_ratio: T,
}

/// Mode count giving conductance `g` at thickness `L/ell`.
pub fn modes_for<T: Scalar>(g: T, thickness_over_ell: T) -> u64 {
    (T::lit(0.75) * g * thickness_over_ell).round().as_f64() as u64
}

impl<T: Scalar> StrongWaveSweep<T> {
    pub fn model_at(&self, nb: T) -> Result<ValidatedModel<T>, ModelError> {
        let a = T::one() / self.thickness_over_ell;
        let modes = modes_for(self.g, self.thickness_over_ell);
        let tb = coefficients::total_transmission(self.x, a);
        let vb = coefficients::ase_coefficient(self.x, a);
        let tau_domega = T::TAU() * nb / (tb * self.flux_ratio - self.eta * vb);
        let tau_over_tc = nb / self.nbc;
        let domega_tc = tau_domega / tau_over_tc;
        DimensionlessBuilder {
            thickness_over_ell: self.thickness_over_ell,
            modes,
            x: self.x,
            eta: self.eta,
            tau_over_tc,
            domega_tc,
            ia_tc: self.flux_ratio * T::lit(modes as f64) * domega_tc / T::TAU(),
            qa: T::zero(),
        }
        .build()
    }

    pub fn variance_at(&self, nb: T, mode: DynamicsMode) -> Result<VarianceBreakdown<T>, SweepError> {
        Ok(photocount_variance(&self.model_at(nb)?, mode)?)
    }

    /// Variance at every photocount of `nbs`, computed in parallel.
    pub fn curve(&self, nbs: &[T], mode: DynamicsMode) -> Result<Vec<VarianceBreakdown<T>>, SweepError> {
        nbs.par_iter().map(|&nb| self.variance_at(nb, mode)).collect()
    }
}

/// Pure spontaneous-emission operating points parameterized by the mean
/// photocount: `tau/t_c = n_b/n_c`, `tau dw = 2 pi n_b/(-eta V_b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AseSweep<T> {
    pub thickness_over_ell: T,
    pub g: T,
    pub x: T,
    pub eta: T,
    pub nbc: T,
}

impl<T: Scalar> AseSweep<T> {
    pub fn model_at(&self, nb: T) -> Result<ValidatedModel<T>, ModelError> {
        let a = T::one() / self.thickness_over_ell;
        let vb = coefficients::ase_coefficient(self.x, a);
        let tau_domega = T::TAU() * nb / (-self.eta * vb);
        let tau_over_tc = nb / self.nbc;
        DimensionlessBuilder {
            thickness_over_ell: self.thickness_over_ell,
            modes: modes_for(self.g, self.thickness_over_ell),
            x: self.x,
            eta: self.eta,
            tau_over_tc,
            domega_tc: tau_domega / tau_over_tc,
            ia_tc: T::zero(),
            qa: T::zero(),
        }
        .build()
    }

    pub fn statistics_at(&self, nb: T, mode: DynamicsMode) -> Result<AseStatistics<T>, SweepError> {
        Ok(ase_statistics(&self.model_at(nb)?, mode)?)
    }

    pub fn curve(&self, nbs: &[T], mode: DynamicsMode) -> Result<Vec<AseStatistics<T>>, SweepError> {
        nbs.par_iter().map(|&nb| self.statistics_at(nb, mode)).collect()
    }
}
