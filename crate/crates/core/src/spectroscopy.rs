//! Noise spectroscopy: recovering the conductance `g` and the correlation
//! time scale from measured noise curves.
//!
//! Fits minimize squared residuals of `ln(ordinate)` with a damped
//! Gauss-Newton (Levenberg-Marquardt) iteration over logarithmic parameters,
//! so positivity needs no constraints. Jacobians are central differences.
//!
//! Spontaneous-emission variance model, `n` the mean photocount:
//!
//! ```text
//! delta_b^2(n) = s {(1/n)[1 - eta V_b (1 + h0/g)] + h(n/n_c)/g}
//! ```
//!
//! with `h0 = g C_VV(0)` and `h(U)` the windowed `g C_VV` over `tau/t_c = U`.
//! Autocorrelation model: `C_nn(t) = s g C_VV(x, t/t_c)/g`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::ase_coefficient;
use crate::correlations::{c_vv, c_vv_at_zero, CorrelationArgs, CorrelationKind};
use crate::curve::{CurveKind, NoiseCurve};
use crate::error::{FitError, NumericalError};
use crate::statistics::{crossovers, windowed_correlation, NoiseMode};

/// Iteration controls shared by both fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative central-difference step in the log parameters.
    pub fd_step: f64,
    /// Convergence threshold on the relative cost decrease and step size.
    pub tolerance: f64,
    /// Fit the multiplicative ordinate amplitude instead of fixing it.
    pub fit_scale: bool,
    /// Amplitude value, or its starting point when fitted.
    pub scale: f64,
    /// Log-residual resolution of the forward model; a fit whose RMS
    /// residual drops below it has converged.
    pub resolution: f64,
    /// Condition number of `J^T J` above which the fit is flagged.
    pub ill_conditioned_above: f64,
    /// Starting `(g, n_c or t_c)`; derived from the curve when absent.
    pub initial: Option<[f64; 2]>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            fd_step: 1.0e-6,
            tolerance: 1.0e-12,
            resolution: 1.0e-8,
            fit_scale: false,
            scale: 1.0,
            ill_conditioned_above: 1.0e8,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FitWarning {
    /// Some parameter combination is barely constrained by the data.
    IllConditioned { condition_number: f64 },
    /// The regime crossover lies outside the sampled abscissae, so the
    /// curve shows a single power law.
    SingleRegime { crossover: f64, lo: f64, hi: f64 },
}

/// Outcome of a noise-curve fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub g: f64,
    /// Mean photocount per correlation time (variance fits).
    pub nbc: Option<f64>,
    /// Correlation time in abscissa units (autocorrelation fits).
    pub tc: Option<f64>,
    pub scale: f64,
    /// `L/L_a`, fixed or fitted.
    pub x: f64,
    /// Free parameters in fit order.
    pub parameters: Vec<String>,
    /// Covariance of the free parameters in natural units.
    pub covariance: Vec<Vec<f64>>,
    /// Covariance in the internal coordinates (logarithms; logit for `x`).
    pub internal_covariance: Vec<Vec<f64>>,
    /// Final sum of squared residuals.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub condition_number: f64,
    /// Least-constrained direction in internal coordinates when flagged.
    pub degenerate_direction: Option<Vec<f64>>,
    pub warnings: Vec<FitWarning>,
    /// Sum of squared residuals after each accepted iteration.
    pub trace: Vec<f64>,
}

impl FitResult {
    pub fn is_ill_conditioned(&self) -> bool {
        self.warnings
            .iter()
            .any(|w| {
                matches!(
                    w,
                    FitWarning::IllConditioned { .. } | FitWarning::SingleRegime { .. }
                )
            })
    }
}

struct Solution {
    theta: Vec<f64>,
    jacobian: DMatrix<f64>,
    cost: f64,
    iterations: usize,
    trace: Vec<f64>,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian<F>(f: &F, theta: &[f64], m: usize, step: f64) -> Result<DMatrix<f64>, FitError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, FitError>,
{
    let mut j = DMatrix::zeros(m, theta.len());
    for k in 0..theta.len() {
        let h = step * theta[k].abs().max(1.0);
        let mut up = theta.to_vec();
        let mut dn = theta.to_vec();
        up[k] += h;
        dn[k] -= h;
        let (ru, rd) = (f(&up)?, f(&dn)?);
        for i in 0..m {
            j[(i, k)] = (ru[i] - rd[i]) / (2.0 * h);
        }
    }
    Ok(j)
}

/// Levenberg-Marquardt with the gain-ratio damping update. The cost never
/// increases across accepted steps.
fn levenberg_marquardt<F>(f: &F, theta0: Vec<f64>, opts: &FitOptions) -> Result<Solution, FitError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, FitError>,
{
    let p = theta0.len();
    let mut theta = theta0;
    let mut r = f(&theta)?;
    let m = r.len();
    let mut cost = sum_sq(&r);
    let mut trace = vec![cost];
    let mut j = jacobian(f, &theta, m, opts.fd_step)?;
    let floor = m as f64 * opts.resolution * opts.resolution;
    let mut lambda = -1.0;
    let mut nu = 2.0;
    for it in 1..=opts.max_iterations {
        let a = j.transpose() * &j;
        let grad = j.transpose() * DVector::from_column_slice(&r);
        if lambda < 0.0 {
            lambda = 1.0e-3 * (0..p).map(|k| a[(k, k)]).fold(0.0, f64::max).max(1e-300);
        }
        if grad.amax() <= 1e-15 * (1.0 + cost) || cost <= floor {
            return Ok(Solution { theta, jacobian: j, cost, iterations: it - 1, trace });
        }
        loop {
            let mut damped = a.clone();
            for k in 0..p {
                damped[(k, k)] += lambda * a[(k, k)].max(1e-12);
            }
            let delta = match damped.clone().cholesky() {
                Some(c) => c.solve(&(-&grad)),
                None => {
                    lambda *= nu;
                    nu *= 2.0;
                    continue;
                }
            };
            let norm_theta = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
            if delta.norm() <= opts.tolerance * (norm_theta + opts.tolerance) {
                return Ok(Solution { theta, jacobian: j, cost, iterations: it, trace });
            }
            let trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(t, d)| t + d).collect();
            let trial_r = f(&trial).ok();
            let trial_cost = trial_r.as_ref().map_or(f64::INFINITY, |r| sum_sq(r));
            // predicted decrease of the quadratic model
            let predicted = -(2.0 * grad.dot(&delta) + (&a * &delta).dot(&delta));
            let rho = (cost - trial_cost) / predicted;
            if trial_cost.is_finite() && rho > 0.0 {
                let rel = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                theta = trial;
                r = trial_r.expect("finite cost implies residuals");
                cost = trial_cost;
                trace.push(cost);
                lambda *= (1.0 / 3.0_f64).max(1.0 - (2.0 * rho - 1.0).powi(3));
                nu = 2.0;
                j = jacobian(f, &theta, m, opts.fd_step)?;
                if rel <= opts.tolerance || cost <= floor {
                    return Ok(Solution { theta, jacobian: j, cost, iterations: it, trace });
                }
                break;
            }
            lambda *= nu;
            nu *= 2.0;
            if !lambda.is_finite() || lambda > 1e300 {
                // no descent direction left at rounding level
                return Ok(Solution { theta, jacobian: j, cost, iterations: it, trace });
            }
        }
    }
    Err(FitError::FitFailed {
        iterations: opts.max_iterations,
        residual: cost,
        trace,
    })
}

/// Covariance, condition number and weakest direction from the Jacobian at
/// the solution. Eigenvalues are floored at `1e-14` of the largest, which
/// inflates the variance along unconstrained directions instead of failing.
fn curvature(j: &DMatrix<f64>, sigma2: f64) -> (DMatrix<f64>, f64, Vec<f64>) {
    let a = j.transpose() * j;
    let eig = SymmetricEigen::new(a);
    let max = eig.eigenvalues.amax();
    let (imin, &min) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("at least one parameter");
    let floor = 1e-14 * max;
    let inv = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.max(floor)));
    let cov = &eig.eigenvectors * inv * eig.eigenvectors.transpose() * sigma2;
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    let mut dir: Vec<f64> = eig.eigenvectors.column(imin).iter().copied().collect();
    // sign convention: largest component positive
    let lead = dir.iter().copied().fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
    if lead < 0.0 {
        dir.iter_mut().for_each(|v| *v = -*v);
    }
    (cov, cond, dir)
}

/// Log-residual weights: `sigma_i/y_i` when uncertainties are given.
fn log_weights(curve: &NoiseCurve) -> Option<Vec<f64>> {
    curve.sigma.as_ref().map(|s| {
        s.iter()
            .zip(&curve.ordinate)
            .map(|(s, y)| s / y)
            .collect()
    })
}

fn log_residuals(model: &[f64], curve: &NoiseCurve, w: &Option<Vec<f64>>) -> Result<Vec<f64>, FitError> {
    model
        .iter()
        .zip(&curve.ordinate)
        .enumerate()
        .map(|(i, (f, y))| {
            if !(*f > 0.0) || !f.is_finite() {
                return Err(FitError::Numerical(NumericalError::NonFinite("fit model")));
            }
            let r = y.ln() - f.ln();
            Ok(w.as_ref().map_or(r, |w| r / w[i]))
        })
        .collect()
}

struct Assembled {
    names: Vec<String>,
    /// Natural value of each free parameter and its derivative with respect
    /// to the internal coordinate.
    natural: Vec<(f64, f64)>,
}

#[allow(clippy::too_many_arguments)]
fn finish(
    sol: Solution,
    curve: &NoiseCurve,
    opts: &FitOptions,
    asm: Assembled,
    g: f64,
    time: f64,
    scale: f64,
    x: f64,
    variance_fit: bool,
    crossover: f64,
) -> FitResult {
    let m = curve.len();
    let p = sol.theta.len();
    let sigma2 = if curve.sigma.is_some() || m <= p {
        1.0
    } else {
        sol.cost / (m - p) as f64
    };
    let (cov, cond, dir) = curvature(&sol.jacobian, sigma2);
    let mut natural = cov.clone();
    for i in 0..p {
        for k in 0..p {
            natural[(i, k)] *= asm.natural[i].1 * asm.natural[k].1;
        }
    }
    let rows = |c: &DMatrix<f64>| (0..p).map(|i| (0..p).map(|k| c[(i, k)]).collect()).collect();
    let mut warnings = Vec::new();
    if !(cond <= opts.ill_conditioned_above) {
        warnings.push(FitWarning::IllConditioned { condition_number: cond });
    }
    let (lo, hi) = (curve.abscissa[0], curve.abscissa[m - 1]);
    if !(lo < crossover && crossover < hi) {
        warnings.push(FitWarning::SingleRegime { crossover, lo, hi });
    }
    let ill = !warnings.is_empty();
    FitResult {
        g,
        nbc: variance_fit.then_some(time),
        tc: (!variance_fit).then_some(time),
        scale,
        x,
        parameters: asm.names,
        covariance: rows(&natural),
        internal_covariance: rows(&cov),
        residual: sol.cost,
        iterations: sol.iterations,
        converged: true,
        condition_number: cond,
        degenerate_direction: ill.then_some(dir),
        warnings,
        trace: sol.trace,
    }
}

/// Known medium inputs of the spontaneous-emission variance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AseSetup {
    pub thickness_over_ell: f64,
    pub x: f64,
    pub eta: f64,
}

/// Minimum number of points for a variance fit.
pub const MIN_VARIANCE_POINTS: usize = 8;

impl AseSetup {
    fn a(&self) -> f64 {
        1.0 / self.thickness_over_ell
    }

    /// Forward model at mean photocounts `nbs`.
    pub fn variance(&self, nbs: &[f64], g: f64, nbc: f64, scale: f64) -> Result<Vec<f64>, NumericalError> {
        let vb = ase_coefficient(self.x, self.a());
        let h0 = c_vv_at_zero(self.x, 1.0);
        nbs.iter()
            .map(|&n| {
                let h = windowed_correlation(CorrelationKind::VV, self.x, self.a(), 1.0, n / nbc)?;
                Ok(scale * ((1.0 - self.eta * vb * (1.0 + h0 / g)) / n + h / g))
            })
            .collect()
    }

    /// `(8/3)/A^2` with `A = sqrt(n)(delta^2 - 1/n)` over the largest points
    /// fixes `g^2/n_c`; a log scan picks `n_c` along that line.
    fn initial_guess(&self, curve: &NoiseCurve, cost: &dyn Fn(&[f64]) -> f64) -> [f64; 2] {
        let vb = ase_coefficient(self.x, self.a());
        let m = curve.len();
        let tail: Vec<f64> = (m.saturating_sub(3)..m)
            .map(|i| {
                let n = curve.abscissa[i];
                (curve.ordinate[i] - (1.0 - self.eta * vb) / n) * n.sqrt()
            })
            .filter(|v| *v > 0.0)
            .collect();
        let amp = if tail.is_empty() {
            curve.ordinate[m - 1] * curve.abscissa[m - 1].sqrt()
        } else {
            tail.iter().sum::<f64>() / tail.len() as f64
        };
        let (lo, hi) = (curve.abscissa[0] * 1e-3, curve.abscissa[m - 1]);
        best_on_line(lo, hi, |nbc| 8.0 / 3.0 * nbc.sqrt() / amp, cost)
    }
}

/// Best `(g(t), t)` over 25 log-spaced `t` in `[lo, hi]`.
fn best_on_line(lo: f64, hi: f64, g_of: impl Fn(f64) -> f64, cost: &dyn Fn(&[f64]) -> f64) -> [f64; 2] {
    let k = 25;
    (0..k)
        .map(|i| {
            let t = (lo.ln() + (hi / lo).ln() * i as f64 / (k - 1) as f64).exp();
            [g_of(t), t]
        })
        .map(|p| (cost(&[p[0].ln(), p[1].ln()]), p))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, p)| p)
        .expect("non-empty scan")
}

fn check_curve(curve: &NoiseCurve, kind: CurveKind, min: usize) -> Result<(), FitError> {
    curve.check()?;
    if curve.kind != kind {
        return Err(FitError::InvalidCurve(format!(
            "expected a {kind:?} curve, got {:?}",
            curve.kind
        )));
    }
    if curve.len() < min {
        return Err(FitError::InvalidCurve(format!(
            "need at least {min} points, got {}",
            curve.len()
        )));
    }
    Ok(())
}

/// Fits `(g, n_c)` (and optionally the amplitude) to a variance curve of
/// pure spontaneous emission.
pub fn fit_ase_variance(
    curve: &NoiseCurve,
    setup: &AseSetup,
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    check_curve(curve, CurveKind::Variance, MIN_VARIANCE_POINTS)?;
    let w = log_weights(curve);
    let unpack = |th: &[f64]| {
        let s = if opts.fit_scale { th[2].exp() } else { opts.scale };
        (th[0].exp(), th[1].exp(), s)
    };
    let resid = |th: &[f64]| -> Result<Vec<f64>, FitError> {
        let (g, nbc, s) = unpack(th);
        log_residuals(&setup.variance(&curve.abscissa, g, nbc, s)?, curve, &w)
    };
    let start = match opts.initial {
        Some(p) => p,
        None => {
            let cost = |th: &[f64]| {
                resid(&[th[0], th[1], opts.scale.ln()])
                    .map_or(f64::INFINITY, |r| sum_sq(&r))
            };
            setup.initial_guess(curve, &cost)
        }
    };
    let mut theta = vec![start[0].ln(), start[1].ln()];
    let mut names = vec!["g".to_string(), "nbc".to_string()];
    if opts.fit_scale {
        theta.push(opts.scale.ln());
        names.push("scale".into());
    }
    let sol = levenberg_marquardt(&resid, theta, opts)?;
    let (g, nbc, s) = unpack(&sol.theta);
    let mut natural = vec![(g, g), (nbc, nbc)];
    if opts.fit_scale {
        natural.push((s, s));
    }
    let asm = Assembled { names, natural };
    let crossover = crossovers(nbc, g, NoiseMode::Ase)[0];
    Ok(finish(sol, curve, opts, asm, g, nbc, s, setup.x, true, crossover))
}

/// Fits many variance curves in parallel; results keep the input order.
pub fn fit_ase_variance_batch(
    curves: &[NoiseCurve],
    setup: &AseSetup,
    opts: &FitOptions,
) -> Vec<Result<FitResult, FitError>> {
    curves
        .par_iter()
        .map(|c| fit_ase_variance(c, setup, opts))
        .collect()
}

/// Setup of an autocorrelation fit of pure spontaneous emission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutocorrelationSetup {
    /// `L/L_a`, the starting value when fitted.
    pub x: f64,
    pub fit_x: bool,
}

/// Minimum number of points for an autocorrelation fit.
pub const MIN_AUTOCORRELATION_POINTS: usize = 4;

fn logistic(z: f64) -> f64 {
    std::f64::consts::PI / (1.0 + (-z).exp())
}

fn logit(x: f64) -> f64 {
    let s = x / std::f64::consts::PI;
    (s / (1.0 - s)).ln()
}

/// `C_nn(t) = s C_VV(x, t/t_c; g)`.
pub fn ase_autocorrelation(ts: &[f64], g: f64, tc: f64, x: f64, scale: f64) -> Vec<f64> {
    ts.iter()
        .map(|&t| scale * c_vv(&CorrelationArgs::new(x, 0.0, 0.0, g).with_t_over_tc(t / tc)))
        .collect()
}

/// Fits `(g, t_c)`, optionally `x` and the amplitude, to an autocorrelation
/// curve of pure spontaneous emission.
pub fn fit_autocorrelation(
    curve: &NoiseCurve,
    setup: &AutocorrelationSetup,
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    check_curve(curve, CurveKind::Autocorrelation, MIN_AUTOCORRELATION_POINTS)?;
    if !(setup.x > 0.0 && setup.x < std::f64::consts::PI) {
        return Err(FitError::InvalidCurve(format!(
            "x = {} must lie in (0, pi)",
            setup.x
        )));
    }
    let w = log_weights(curve);
    // internal layout: ln g, ln t_c, [logit x], [ln s]
    let xi = setup.fit_x.then_some(2);
    let si = opts.fit_scale.then_some(2 + setup.fit_x as usize);
    let unpack = |th: &[f64]| {
        let x = xi.map_or(setup.x, |i| logistic(th[i]));
        let s = si.map_or(opts.scale, |i| th[i].exp());
        (th[0].exp(), th[1].exp(), x, s)
    };
    let resid = |th: &[f64]| -> Result<Vec<f64>, FitError> {
        let (g, tc, x, s) = unpack(th);
        log_residuals(&ase_autocorrelation(&curve.abscissa, g, tc, x, s), curve, &w)
    };
    let start = match opts.initial {
        Some(p) => p,
        None => {
            // long-time tail C = sqrt(t_c/t)/g fixes sqrt(t_c)/g
            let m = curve.len();
            let b = (m.saturating_sub(3)..m)
                .map(|i| curve.ordinate[i] * curve.abscissa[i].sqrt() / opts.scale)
                .sum::<f64>()
                / (m - m.saturating_sub(3)) as f64;
            let cost = |th: &[f64]| {
                let (g, tc) = (th[0].exp(), th[1].exp());
                log_residuals(&ase_autocorrelation(&curve.abscissa, g, tc, setup.x, opts.scale), curve, &w)
                    .map_or(f64::INFINITY, |r| sum_sq(&r))
            };
            let (lo, hi) = (curve.abscissa[0] * 1e-2, curve.abscissa[m - 1]);
            best_on_line(lo, hi, |tc| tc.sqrt() / b, &cost)
        }
    };
    let mut theta = vec![start[0].ln(), start[1].ln()];
    let mut names = vec!["g".to_string(), "tc".to_string()];
    if setup.fit_x {
        theta.push(logit(setup.x));
        names.push("x".into());
    }
    if opts.fit_scale {
        theta.push(opts.scale.ln());
        names.push("scale".into());
    }
    let sol = levenberg_marquardt(&resid, theta, opts)?;
    let (g, tc, x, s) = unpack(&sol.theta);
    let mut natural = vec![(g, g), (tc, tc)];
    if xi.is_some() {
        // d/dz of pi/(1 + e^-z) = x (1 - x/pi)
        natural.push((x, x * (1.0 - x / std::f64::consts::PI)));
    }
    if opts.fit_scale {
        natural.push((s, s));
    }
    let asm = Assembled { names, natural };
    Ok(finish(sol, curve, opts, asm, g, tc, s, x, false, tc))
}
