//! Stochastic cross-checks of the analytic layers.
//!
//! Stationary Gaussian processes are synthesized by circulant embedding: the
//! lag covariance is wrapped onto a periodic grid, diagonalized by an FFT and
//! factored frequency by frequency. Intensity traces are `|E|^2` of a circular
//! complex Gaussian field whose field correlation is `sqrt(C1_TT)`.
//!
//! The joint `(T, V)` process is `T = |E|^2 + xi`, `V = 1 + zeta` with
//! `(xi, zeta)` Gaussian, independent of `E`, and covariance
//! `[[C2_TT, C_TV], [C_TV, C_VV]]`. This reproduces every second-order
//! statistic of the pair, which is all the photocount variance depends on;
//! higher moments are a modelling choice. `T` may dip below zero with small
//! probability; counting clamps the Poisson mean at zero and reports how often.
//!
//! Random streams are keyed by `(seed, realization, role)` so results do not
//! depend on the number of worker threads.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, StandardNormal};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::coefficients::MeanCoefficients;
use crate::correlations::{c1_tt, c2_tt, c_tv, c_vv, CorrelationArgs};
use crate::error::SimulationError;
use crate::model::ValidatedModel;
use crate::statistics::{photocount_variance, DynamicsMode, VarianceBreakdown};

/// Purpose of a random stream within one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    Speckle = 0,
    LongRange = 1,
    Counting = 2,
}

const ROLES: u64 = 4;

/// Independent generator for `(seed, realization, role)`.
pub fn stream_rng(seed: u64, realization: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(realization * ROLES + role as u64);
    rng
}

/// Where a trace came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub realization: u64,
}

/// Intensity samples `T(k dt)`, normalized to unit mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeckleTrace {
    /// Time step in units of `t_c`.
    pub dt: f64,
    pub values: Vec<f64>,
    pub seed: SeedRecord,
}

/// Photocounts of consecutive windows of one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingRecord {
    pub counts: Vec<u64>,
    /// Window length `tau/t_c`.
    pub window: f64,
    /// Photocounts per `t_c` at unit intensity.
    pub rate: f64,
    /// Windows whose Poisson mean was negative and clamped to zero.
    pub clamped: usize,
}

/// Smallest eigenvalue of a symmetric 1x1 or 2x2 matrix (row-major).
fn min_eigenvalue(m: &[f64], dim: usize) -> f64 {
    if dim == 1 {
        return m[0];
    }
    let (p, q, r) = (m[0], m[1], m[3]);
    0.5 * (p + r) - (0.25 * (p - r) * (p - r) + q * q).sqrt()
}

/// Lower Cholesky factor of a PSD 1x1 or 2x2 matrix, clamping rounding-level
/// negative pivots to zero.
fn cholesky(m: &[f64], dim: usize) -> [f64; 4] {
    let l11 = m[0].max(0.0).sqrt();
    if dim == 1 {
        return [l11, 0.0, 0.0, 0.0];
    }
    let l21 = if l11 > 0.0 { m[2] / l11 } else { 0.0 };
    let l22 = (m[3] - l21 * l21).max(0.0).sqrt();
    [l11, 0.0, l21, l22]
}

/// Relative eigenvalue floor below which the embedded covariance is rejected.
pub const PSD_TOLERANCE: f64 = 1.0e-9;

/// Largest embedding, in multiples of the minimal one, tried before giving up.
const MAX_PADDING: usize = 8;

/// Sampler of 1- or 2-component stationary real Gaussian processes on
/// `steps` equally spaced points.
pub struct GaussianSynthesizer {
    dim: usize,
    steps: usize,
    embed: usize,
    /// Per-frequency lower factors, row-major 2x2 blocks.
    factors: Vec<[f64; 4]>,
    fft: Arc<dyn Fft<f64>>,
    min_eigenvalue: f64,
}

impl std::fmt::Debug for GaussianSynthesizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaussianSynthesizer")
            .field("dim", &self.dim)
            .field("steps", &self.steps)
            .field("embed", &self.embed)
            .field("min_eigenvalue", &self.min_eigenvalue)
            .finish()
    }
}

impl GaussianSynthesizer {
    /// `cov(t)` returns the row-major `dim x dim` covariance at lag `t`; it
    /// must be symmetric in the lag and in the component indices.
    pub fn new<F>(dim: usize, dt: f64, steps: usize, cov: F) -> Result<Self, SimulationError>
    where
        F: Fn(f64) -> Vec<f64>,
    {
        if !(dim == 1 || dim == 2) {
            return Err(SimulationError::InvalidSetup(format!(
                "only 1 or 2 components are supported, got {dim}"
            )));
        }
        if steps < 2 || !(dt > 0.0) || !dt.is_finite() {
            return Err(SimulationError::InvalidSetup(format!(
                "need at least 2 steps and a positive step, got {steps} and {dt}"
            )));
        }
        let base = (2 * (steps - 1)).next_power_of_two();
        let mut planner = FftPlanner::new();
        let mut best: Option<(f64, f64)> = None;
        let mut padding = 1;
        while padding <= MAX_PADDING {
            let m = base * padding;
            let lags: Vec<Vec<f64>> = (0..=m / 2).map(|j| cov(j as f64 * dt)).collect();
            if lags.iter().flatten().any(|v| !v.is_finite()) {
                return Err(SimulationError::InvalidSetup("non-finite covariance".into()));
            }
            let fft = planner.plan_fft_forward(m);
            let mut spectra = vec![vec![0.0; m]; dim * dim];
            for a in 0..dim {
                for b in a..dim {
                    let mut buf: Vec<Complex<f64>> = (0..m)
                        .map(|k| Complex::new(lags[k.min(m - k)][a * dim + b], 0.0))
                        .collect();
                    fft.process(&mut buf);
                    for k in 0..m {
                        spectra[a * dim + b][k] = buf[k].re;
                        spectra[b * dim + a][k] = buf[k].re;
                    }
                }
            }
            let mats: Vec<Vec<f64>> = (0..m)
                .map(|k| (0..dim * dim).map(|e| spectra[e][k]).collect())
                .collect();
            let scale = mats
                .iter()
                .map(|s| (0..dim).map(|i| s[i * dim + i]).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            let low = mats
                .iter()
                .map(|s| min_eigenvalue(s, dim))
                .fold(f64::INFINITY, f64::min);
            if low >= -PSD_TOLERANCE * scale {
                let inv = 1.0 / (m as f64).sqrt();
                let factors = mats
                    .iter()
                    .map(|s| cholesky(s, dim).map(|v| v * inv))
                    .collect();
                return Ok(Self {
                    dim,
                    steps,
                    embed: m,
                    factors,
                    fft: planner.plan_fft_forward(m),
                    min_eigenvalue: low,
                });
            }
            if best.is_none_or(|(l, s)| low / scale > l / s) {
                best = Some((low, scale));
            }
            padding *= 2;
        }
        let (min_eigenvalue, scale) = best.expect("at least one embedding tried");
        Err(SimulationError::SynthesisError {
            min_eigenvalue,
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Circulant embedding size.
    pub fn embedding(&self) -> usize {
        self.embed
    }

    /// Smallest eigenvalue of the embedded spectral matrices.
    pub fn min_spectral_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// One draw as complex sequences, one per component; real and imaginary
    /// parts are independent realizations with the target covariance.
    pub fn sample_complex<R: Rng>(&self, rng: &mut R) -> Vec<Vec<Complex<f64>>> {
        let m = self.embed;
        let mut out = vec![vec![Complex::new(0.0, 0.0); m]; self.dim];
        for k in 0..m {
            let z: [Complex<f64>; 2] = std::array::from_fn(|_| {
                Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let l = &self.factors[k];
            out[0][k] = z[0] * l[0];
            if self.dim == 2 {
                out[1][k] = z[0] * l[2] + z[1] * l[3];
            }
        }
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for seq in &mut out {
            self.fft.process_with_scratch(seq, &mut scratch);
            seq.truncate(self.steps);
        }
        out
    }

    /// One draw of each component as a real sequence.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        self.sample_complex(rng)
            .into_iter()
            .map(|s| s.into_iter().map(|z| z.re).collect())
            .collect()
    }
}

/// Intensity sampler `T = |E|^2` for a circular Gaussian field with real
/// field correlation `g1`.
#[derive(Debug)]
pub struct SpeckleSynthesizer {
    dt: f64,
    field: GaussianSynthesizer,
}

impl SpeckleSynthesizer {
    pub fn new<F: Fn(f64) -> f64>(g1: F, dt: f64, steps: usize) -> Result<Self, SimulationError> {
        let g0 = g1(0.0);
        if (g0 - 1.0).abs() > 1.0e-12 {
            return Err(SimulationError::InvalidSetup(format!(
                "field correlation must be 1 at zero lag, got {g0}"
            )));
        }
        Ok(Self {
            dt,
            field: GaussianSynthesizer::new(1, dt, steps, |t| vec![g1(t)])?,
        })
    }

    pub fn sample(&self, seed: u64, realization: u64) -> SpeckleTrace {
        let mut rng = stream_rng(seed, realization, StreamRole::Speckle);
        SpeckleTrace {
            dt: self.dt,
            values: self.intensity(&mut rng),
            seed: SeedRecord { seed, realization },
        }
    }

    fn intensity<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        // E = (X + iY)/sqrt(2) with X, Y independent, each of covariance g1
        self.field.sample_complex(rng)[0]
            .iter()
            .map(|z| 0.5 * z.norm_sqr())
            .collect()
    }
}

/// One draw of a speckle trace; see [`SpeckleSynthesizer`] for ensembles.
pub fn sample_speckle<F: Fn(f64) -> f64>(
    g1: F,
    dt: f64,
    steps: usize,
    seed: u64,
) -> Result<SpeckleTrace, SimulationError> {
    Ok(SpeckleSynthesizer::new(g1, dt, steps)?.sample(seed, 0))
}

/// Paired normalized traces `T(t)/T_mean`, `V(t)/V_mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTrace {
    pub dt: f64,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
}

/// Sampler of joint `(T, V)` traces for a slab at `(x, a, g)`.
#[derive(Debug)]
pub struct JointTraceModel {
    dt: f64,
    speckle: SpeckleSynthesizer,
    long_range: GaussianSynthesizer,
}

impl JointTraceModel {
    /// `dt` is in units of `t_c`. In static mode every lag carries the
    /// equal-time covariance, so each realization is frozen in time.
    pub fn new(
        x: f64,
        a: f64,
        g: f64,
        dt: f64,
        steps: usize,
        mode: DynamicsMode,
    ) -> Result<Self, SimulationError> {
        let lag = move |t: f64| match mode {
            DynamicsMode::Dynamic => CorrelationArgs::new(x, 0.0, a, g).with_t_over_tc(t),
            DynamicsMode::Static => CorrelationArgs::new(x, 0.0, a, g),
        };
        // C1 = g1^2 with g1 = P_a(w)/P_a(-x^2) > 0 below threshold
        let speckle = SpeckleSynthesizer::new(|t| c1_tt(&lag(t)).sqrt(), dt, steps)?;
        let long_range = GaussianSynthesizer::new(2, dt, steps, |t| {
            let args = lag(t);
            let tv = c_tv(&args);
            vec![c2_tt(&args), tv, tv, c_vv(&args)]
        })?;
        Ok(Self {
            dt,
            speckle,
            long_range,
        })
    }

    pub fn for_model(
        model: &ValidatedModel<f64>,
        steps: usize,
        mode: DynamicsMode,
    ) -> Result<Self, SimulationError> {
        let dt = model.tau_over_tc() / (steps - 1) as f64;
        Self::new(model.x(), model.a(), model.g(), dt, steps, mode)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn sample(&self, seed: u64, realization: u64) -> JointTrace {
        let mut rng = stream_rng(seed, realization, StreamRole::Speckle);
        let intensity = self.speckle.intensity(&mut rng);
        let mut rng = stream_rng(seed, realization, StreamRole::LongRange);
        let lr = self.long_range.sample(&mut rng);
        JointTrace {
            dt: self.dt,
            t: intensity.iter().zip(&lr[0]).map(|(i, xi)| i + xi).collect(),
            v: lr[1].iter().map(|z| 1.0 + z).collect(),
        }
    }
}

/// Trapezoid mean of `values` over their full span.
pub fn window_mean(values: &[f64]) -> f64 {
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let sum: f64 = values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]);
    sum / (n - 1) as f64
}

/// Conditional-Poisson counts in consecutive windows of length `tau`.
///
/// Window `i` covers samples `[i w, (i + 1) w]` with `w = round(tau/dt)`;
/// its count is Poisson with mean `flux * int T dt`.
pub fn cox_count(
    trace: &SpeckleTrace,
    flux: f64,
    tau: f64,
    seed: u64,
) -> Result<CountingRecord, SimulationError> {
    let w = (tau / trace.dt).round() as usize;
    if w == 0 || !(flux * tau).is_finite() || flux < 0.0 {
        return Err(SimulationError::InvalidSetup(format!(
            "window {tau} and flux {flux} must be finite, positive and span a step"
        )));
    }
    let windows = (trace.values.len().saturating_sub(1)) / w;
    let mut rng = stream_rng(seed, trace.seed.realization, StreamRole::Counting);
    let mut clamped = 0;
    let counts = (0..windows)
        .map(|i| {
            let mean = flux * tau * window_mean(&trace.values[i * w..=(i + 1) * w]);
            if mean < 0.0 {
                clamped += 1;
            }
            poisson(&mut rng, mean)
        })
        .collect();
    Ok(CountingRecord {
        counts,
        window: w as f64 * trace.dt,
        rate: flux,
        clamped,
    })
}

fn poisson<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean > 0.0 {
        rng.sample(Poisson::new(mean).expect("finite positive mean")) as u64
    } else {
        0
    }
}

/// Value and jackknife standard error of a statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub realizations: usize,
}

/// Delete-one jackknife of `stat` applied to the column means of
/// per-realization feature rows.
pub fn jackknife<const K: usize, F>(rows: &[[f64; K]], stat: F) -> Estimate
where
    F: Fn(&[f64; K]) -> f64,
{
    let n = rows.len();
    let mut total = [0.0; K];
    for r in rows {
        for k in 0..K {
            total[k] += r[k];
        }
    }
    let value = stat(&total.map(|s| s / n as f64));
    if n < 2 {
        return Estimate {
            value,
            std_error: f64::NAN,
            realizations: n,
        };
    }
    let loo: Vec<f64> = rows
        .iter()
        .map(|r| {
            let mut m = [0.0; K];
            for k in 0..K {
                m[k] = (total[k] - r[k]) / (n - 1) as f64;
            }
            stat(&m)
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / n as f64;
    let ss: f64 = loo.iter().map(|v| (v - mean) * (v - mean)).sum();
    Estimate {
        value,
        std_error: ((n - 1) as f64 / n as f64 * ss).sqrt(),
        realizations: n,
    }
}

/// `var(X)/mean(X)^2` from rows `[X, X^2]`.
fn normalized_variance(m: &[f64; 2]) -> f64 {
    (m[1] - m[0] * m[0]) / (m[0] * m[0])
}

/// Minimum ensemble size for [`windowed_variance_empirical`].
pub const MIN_REALIZATIONS: usize = 100;

/// Normalized variance of the window average of `T` over `[0, tau]`, one
/// window per trace.
pub fn windowed_variance_empirical(
    traces: &[Vec<f64>],
    dt: f64,
    tau: f64,
) -> Result<Estimate, SimulationError> {
    if traces.len() < MIN_REALIZATIONS {
        return Err(SimulationError::InvalidSetup(format!(
            "need at least {MIN_REALIZATIONS} realizations, got {}",
            traces.len()
        )));
    }
    let w = (tau / dt).round() as usize;
    if traces.iter().any(|t| t.len() <= w) {
        return Err(SimulationError::InvalidSetup(format!(
            "traces shorter than the window of {w} steps"
        )));
    }
    let rows: Vec<[f64; 2]> = traces
        .iter()
        .map(|t| {
            let m = window_mean(&t[..=w]);
            [m, m * m]
        })
        .collect();
    Ok(jackknife(&rows, normalized_variance))
}

/// Settings shared by the ensemble drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub realizations: usize,
    pub seed: u64,
    /// Samples per window, endpoints included.
    pub steps: usize,
    /// Fail with `PrecisionNotReached` above this relative standard error.
    pub max_rel_error: Option<f64>,
    pub mode: DynamicsMode,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            realizations: 10_000,
            seed: 0,
            steps: 257,
            max_rel_error: None,
            mode: DynamicsMode::Dynamic,
        }
    }
}

/// Monte Carlo estimate of `delta_b^2` next to its analytic value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McComparison {
    pub estimate: Estimate,
    pub analytic: VarianceBreakdown<f64>,
    /// `(estimate - analytic)/std_error`.
    pub z_score: f64,
    /// Windows whose Poisson mean was clamped at zero.
    pub clamped: usize,
}

impl McComparison {
    fn new(estimate: Estimate, analytic: VarianceBreakdown<f64>, clamped: usize) -> Self {
        Self {
            z_score: (estimate.value - analytic.total) / estimate.std_error,
            estimate,
            analytic,
            clamped,
        }
    }

    pub fn within(&self, sigmas: f64) -> bool {
        self.z_score.abs() <= sigmas
    }
}

fn check_precision(e: &Estimate, opts: &McOptions) -> Result<(), SimulationError> {
    if let Some(req) = opts.max_rel_error {
        let achieved = e.std_error / e.value.abs();
        if !(achieved <= req) {
            return Err(SimulationError::PrecisionNotReached {
                achieved,
                requested: req,
            });
        }
    }
    Ok(())
}

fn check_options(opts: &McOptions) -> Result<(), SimulationError> {
    if opts.realizations < 2 || opts.steps < 2 {
        return Err(SimulationError::InvalidSetup(
            "need at least 2 realizations and 2 steps per window".into(),
        ));
    }
    Ok(())
}

/// Semiclassical photocounting without spontaneous emission: Poisson counts
/// with mean `n_b <T>_window`, compared with `1/n_b + d_TT`.
pub fn semiclassical_variance(
    model: &ValidatedModel<f64>,
    opts: &McOptions,
) -> Result<McComparison, SimulationError> {
    check_options(opts)?;
    let coeffs = MeanCoefficients::compute(model);
    if coeffs.phi()? != 0.0 || model.detection().qa != 0.0 {
        return Err(SimulationError::InvalidSetup(
            "semiclassical counting needs coherent input and no spontaneous emission".into(),
        ));
    }
    let traces = JointTraceModel::for_model(model, opts.steps, opts.mode)?;
    let nb = coeffs.nb;
    let rows: Vec<([f64; 2], bool)> = (0..opts.realizations as u64)
        .into_par_iter()
        .map(|r| {
            let tr = traces.sample(opts.seed, r);
            let mean = nb * window_mean(&tr.t);
            let mut rng = stream_rng(opts.seed, r, StreamRole::Counting);
            let n = poisson(&mut rng, mean) as f64;
            ([n, n * n], mean < 0.0)
        })
        .collect();
    let clamped = rows.iter().filter(|r| r.1).count();
    let rows: Vec<[f64; 2]> = rows.into_iter().map(|r| r.0).collect();
    let estimate = jackknife(&rows, normalized_variance);
    check_precision(&estimate, opts)?;
    let analytic = photocount_variance(model, opts.mode)?;
    Ok(McComparison::new(estimate, analytic, clamped))
}

/// Ensemble average of the long-sampling-time second moment of the
/// photocount, evaluated per realization from sampled `(T, V)` traces.
///
/// With `A` the transmitted and `E` the emitted mean counts and
/// `k = 2 pi/(tau dw)`, one realization contributes
/// `<n> = A <T> + E <V>` and
/// `<n^2> = <n> + A^2 (1 + Q_a/n_a) <T>^2 + 2 A E (<T><V> + k <TV>)
///          + E^2 (<V>^2 + k <V^2>)`,
/// where `<.>` are window averages of the normalized traces.
pub fn quadrature_oracle_nb2(
    model: &ValidatedModel<f64>,
    opts: &McOptions,
) -> Result<McComparison, SimulationError> {
    check_options(opts)?;
    let coeffs = MeanCoefficients::compute(model);
    coeffs.phi()?;
    let det = model.detection();
    let na = det.na();
    let q = if na > 0.0 { det.qa / na } else { 0.0 };
    let (a, e) = (coeffs.transmitted, coeffs.emitted);
    let k = std::f64::consts::TAU / det.tau_domega();
    let traces = JointTraceModel::for_model(model, opts.steps, opts.mode)?;
    let rows: Vec<[f64; 2]> = (0..opts.realizations as u64)
        .into_par_iter()
        .map(|r| {
            let tr = traces.sample(opts.seed, r);
            let mt = window_mean(&tr.t);
            let mv = window_mean(&tr.v);
            let tv: Vec<f64> = tr.t.iter().zip(&tr.v).map(|(t, v)| t * v).collect();
            let vv: Vec<f64> = tr.v.iter().map(|v| v * v).collect();
            let n = a * mt + e * mv;
            let n2 = n
                + a * a * (1.0 + q) * mt * mt
                + 2.0 * a * e * (mt * mv + k * window_mean(&tv))
                + e * e * (mv * mv + k * window_mean(&vv));
            [n, n2]
        })
        .collect();
    let estimate = jackknife(&rows, |m| (m[1] - m[0] * m[0]) / (m[0] * m[0]));
    check_precision(&estimate, opts)?;
    let analytic = photocount_variance(model, opts.mode)?;
    Ok(McComparison::new(estimate, analytic, 0))
}

/// Empirical intensity correlation at one lag next to `|g1|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiegertPoint {
    pub lag: f64,
    pub empirical: Estimate,
    pub expected: f64,
    pub z_score: f64,
}

/// Checks `<T(0) T(t)>/<T>^2 - 1 = g1(t)^2` on speckle ensembles, averaging
/// over all time origins within each trace.
pub fn siegert_check<F: Fn(f64) -> f64 + Sync>(
    g1: F,
    dt: f64,
    steps: usize,
    lags: &[usize],
    realizations: usize,
    seed: u64,
) -> Result<Vec<SiegertPoint>, SimulationError> {
    if let Some(&l) = lags.iter().find(|&&l| l >= steps) {
        return Err(SimulationError::InvalidSetup(format!(
            "lag {l} does not fit in {steps} steps"
        )));
    }
    let synth = SpeckleSynthesizer::new(&g1, dt, steps)?;
    let traces: Vec<Vec<f64>> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| synth.sample(seed, r).values)
        .collect();
    Ok(lags
        .iter()
        .map(|&l| {
            let rows: Vec<[f64; 3]> = traces
                .iter()
                .map(|t| {
                    let n = (steps - l) as f64;
                    let head = t[..steps - l].iter().sum::<f64>() / n;
                    let tail = t[l..].iter().sum::<f64>() / n;
                    let prod = (0..steps - l).map(|j| t[j] * t[j + l]).sum::<f64>() / n;
                    [prod, head, tail]
                })
                .collect();
            let empirical = jackknife(&rows, |m| m[0] / (m[1] * m[2]) - 1.0);
            let expected = g1(l as f64 * dt).powi(2);
            SiegertPoint {
                lag: l as f64 * dt,
                empirical,
                expected,
                z_score: (empirical.value - expected) / empirical.std_error,
            }
        })
        .collect())
}

const CACHE_MAGIC: &[u8; 4] = b"SPKT";
/// Version of the binary trace cache layout.
pub const CACHE_VERSION: u32 = 1;

/// Writes `magic, version u32, dt f64, steps u64, seed u64, realization u64`
/// followed by the raw samples, all little-endian.
pub fn write_trace<W: Write>(trace: &SpeckleTrace, mut w: W) -> Result<(), SimulationError> {
    let io = |e: std::io::Error| SimulationError::Cache(e.to_string());
    w.write_all(CACHE_MAGIC).map_err(io)?;
    w.write_all(&CACHE_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&trace.dt.to_le_bytes()).map_err(io)?;
    w.write_all(&(trace.values.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&trace.seed.seed.to_le_bytes()).map_err(io)?;
    w.write_all(&trace.seed.realization.to_le_bytes()).map_err(io)?;
    for v in &trace.values {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_trace<R: Read>(mut r: R) -> Result<SpeckleTrace, SimulationError> {
    let io = |e: std::io::Error| SimulationError::Cache(e.to_string());
    let mut word = [0u8; 8];
    let mut half = [0u8; 4];
    r.read_exact(&mut half).map_err(io)?;
    if &half != CACHE_MAGIC {
        return Err(SimulationError::Cache("not a trace cache file".into()));
    }
    r.read_exact(&mut half).map_err(io)?;
    let version = u32::from_le_bytes(half);
    if version != CACHE_VERSION {
        return Err(SimulationError::Cache(format!("unsupported version {version}")));
    }
    let mut next = |r: &mut R| -> Result<[u8; 8], SimulationError> {
        r.read_exact(&mut word).map_err(io)?;
        Ok(word)
    };
    let dt = f64::from_le_bytes(next(&mut r)?);
    let steps = u64::from_le_bytes(next(&mut r)?) as usize;
    let seed = u64::from_le_bytes(next(&mut r)?);
    let realization = u64::from_le_bytes(next(&mut r)?);
    let values = (0..steps)
        .map(|_| next(&mut r).map(f64::from_le_bytes))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SpeckleTrace {
        dt,
        values,
        seed: SeedRecord { seed, realization },
    })
}

pub fn write_trace_path(trace: &SpeckleTrace, path: &Path) -> Result<(), SimulationError> {
    let f = std::fs::File::create(path).map_err(|e| SimulationError::Cache(e.to_string()))?;
    write_trace(trace, std::io::BufWriter::new(f))
}

pub fn read_trace_path(path: &Path) -> Result<SpeckleTrace, SimulationError> {
    let f = std::fs::File::open(path).map_err(|e| SimulationError::Cache(e.to_string()))?;
    read_trace(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = stream_rng(7, 3, StreamRole::Speckle).random();
        let b: u64 = stream_rng(7, 3, StreamRole::Speckle).random();
        let c: u64 = stream_rng(7, 3, StreamRole::Counting).random();
        let d: u64 = stream_rng(7, 4, StreamRole::Speckle).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn frozen_speckle_is_constant_and_exponential() {
        let s = SpeckleSynthesizer::new(|_| 1.0, 0.1, 33).unwrap();
        let mut rows = Vec::new();
        for r in 0..4000 {
            let t = s.sample(1, r).values;
            let spread = t.iter().fold(0.0_f64, |m, v| m.max((v - t[0]).abs()));
            assert!(spread < 1e-12 * t[0].max(1.0));
            assert!(t[0] >= 0.0);
            rows.push([t[0], t[0] * t[0]]);
        }
        // exponential law: mean 1, normalized variance 1
        let e = jackknife(&rows, normalized_variance);
        assert!((e.value - 1.0).abs() < 4.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn rejects_invalid_covariance() {
        assert!(matches!(
            SpeckleSynthesizer::new(|_| 0.5, 0.1, 8),
            Err(SimulationError::InvalidSetup(_))
        ));
        // a covariance growing with lag is not positive semidefinite
        let r = GaussianSynthesizer::new(1, 0.1, 32, |t| vec![1.0 + t]);
        assert!(matches!(r, Err(SimulationError::SynthesisError { .. })));
    }

    #[test]
    fn constant_trace_counts_are_poisson() {
        let trace = SpeckleTrace {
            dt: 0.01,
            values: vec![1.0; 200_001],
            seed: SeedRecord {
                seed: 5,
                realization: 0,
            },
        };
        let rec = cox_count(&trace, 50.0, 0.1, 5).unwrap();
        assert_eq!(rec.counts.len(), 20_000);
        let rows: Vec<[f64; 2]> = rec.counts.iter().map(|&c| [c as f64, (c * c) as f64]).collect();
        let e = jackknife(&rows, |m| (m[1] - m[0] * m[0]) / m[0]);
        assert!((e.value - 1.0).abs() < 4.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn frozen_speckle_counts_are_bose_einstein() {
        let s = SpeckleSynthesizer::new(|_| 1.0, 0.1, 11).unwrap();
        let nbar = 3.0;
        let rows: Vec<[f64; 2]> = (0..20_000)
            .map(|r| {
                let rec = cox_count(&s.sample(2, r), nbar, 1.0, 2).unwrap();
                let c = rec.counts[0] as f64;
                [c, c * c]
            })
            .collect();
        let e = jackknife(&rows, normalized_variance);
        assert!((e.value - (1.0 / nbar + 1.0)).abs() < 4.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn jackknife_of_mean_is_standard_error() {
        let rows: Vec<[f64; 1]> = (0..100).map(|i| [i as f64]).collect();
        let e = jackknife(&rows, |m| m[0]);
        let sd = (rows.iter().map(|r| (r[0] - 49.5).powi(2)).sum::<f64>() / 99.0).sqrt();
        assert!((e.std_error - sd / 10.0).abs() < 1e-12);
    }

    #[test]
    fn cache_round_trip() {
        let t = sample_speckle(|u| (-u).exp(), 0.05, 64, 9).unwrap();
        let mut buf = Vec::new();
        write_trace(&t, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 * 4 + 8 * 64);
        assert_eq!(read_trace(buf.as_slice()).unwrap(), t);
        buf[0] = b'X';
        assert!(read_trace(buf.as_slice()).is_err());
    }

    #[test]
    fn window_mean_is_trapezoid() {
        assert_eq!(window_mean(&[1.0, 3.0]), 2.0);
        assert_eq!(window_mean(&[0.0, 1.0, 2.0, 3.0]), 1.5);
        assert_eq!(window_mean(&[4.0]), 4.0);
    }
}
