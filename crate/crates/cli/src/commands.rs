//! The subcommands. Each returns its outputs; writing happens in one place.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use specklamp::coefficients::{ase_coefficient, total_reflection, total_transmission};
use specklamp::correlations::{CorrelationArgs, CorrelationKind};
use specklamp::montecarlo::{
    quadrature_oracle_nb2, semiclassical_variance, siegert_check, write_trace_path, JointTraceModel,
    McComparison, SeedRecord, SpeckleSynthesizer, SpeckleTrace,
};
use specklamp::spectroscopy::{
    fit_ase_variance, fit_autocorrelation, AseSetup, AutocorrelationSetup, FitResult,
};
use specklamp::statistics::{
    photocount_autocorrelation, photocount_variance, AseSweep, NoiseMode, StrongWaveSweep,
    VarianceBreakdown,
};
use specklamp::{CurveKind, Model, ModelError, NoiseCurve};

use crate::config::{Range, RunConfig, SimulationKind};
use crate::error::CliError;
use crate::table::Table;

/// Everything a command produces besides its tables.
#[derive(Debug, Default)]
pub struct Output {
    pub tables: Vec<Table>,
    pub json: Vec<(String, serde_json::Value)>,
    /// Files already written, relative to the output directory.
    pub files: Vec<String>,
    pub seed: Option<u64>,
    pub artifact_choices: Vec<String>,
    pub warnings: Vec<String>,
}

impl Output {
    fn with_model(model: &Model) -> Self {
        Self {
            warnings: model.warnings().iter().map(|w| format!("{w:?}")).collect(),
            ..Self::default()
        }
    }
}

fn check_x(x: f64) -> Result<(), ModelError> {
    if !x.is_finite() || x < 0.0 {
        return Err(ModelError::InvalidParameter {
            name: "x",
            value: x,
            reason: "must be finite and non-negative",
        });
    }
    if x >= PI {
        return Err(ModelError::ThresholdExceeded { x });
    }
    Ok(())
}

pub fn coeffs(config: &RunConfig) -> Result<Output, CliError> {
    let model = config.model()?;
    let xs = config.coeffs.x.points()?;
    for &x in &xs {
        check_x(x)?;
    }
    let a = model.a();
    let mut t = Table::new("coeffs", &["x", "Tb", "Rb", "Vb"]);
    t.extend(xs.iter().map(|&x| {
        vec![
            x,
            total_transmission(x, a),
            total_reflection(x, a),
            ase_coefficient(x, a),
        ]
    }));
    let mut out = Output::with_model(&model);
    out.tables.push(t);
    Ok(out)
}

pub fn corr(config: &RunConfig) -> Result<Output, CliError> {
    let model = config.model()?;
    let kinds = CorrelationKind::ALL;
    let mut cols = vec!["t_over_tc", "y"];
    cols.extend(kinds.iter().map(|k| k.label()));
    let mut t = Table::new("corr", &cols);
    let ts = config.corr.t_over_tc.points()?;
    t.extend(ts.par_iter().map(|&s| {
        let args = CorrelationArgs::at_time(&model, s);
        let mut row = vec![s, args.y];
        row.extend(kinds.iter().map(|k| k.evaluate(&args)));
        row
    }).collect::<Vec<_>>());
    let mut out = Output::with_model(&model);
    out.tables.push(t);
    Ok(out)
}

const VARIANCE_COLUMNS: [&str; 11] = [
    "nb",
    "phi",
    "shot",
    "interference",
    "classical_tt",
    "cross_tv",
    "ase_vv",
    "delta2",
    "d_TT",
    "d_TV",
    "d_VV",
];

fn variance_row(v: &VarianceBreakdown<f64>) -> Vec<f64> {
    vec![
        v.nb,
        v.phi,
        v.shot,
        v.interference,
        v.classical_tt,
        v.cross_tv,
        v.ase_vv,
        v.total,
        v.deltas.tt,
        v.deltas.tv,
        v.deltas.vv,
    ]
}

pub fn variance(config: &RunConfig) -> Result<Output, CliError> {
    let model = config.model()?;
    let mode = config.variance.mode;
    let mut t = Table::new("variance", &VARIANCE_COLUMNS);
    match config.variance.sweep {
        None => t.push(variance_row(&photocount_variance(&model, mode)?)),
        Some(sweep) => {
            let nbs = sweep.nb.points()?;
            let (thickness, g) = (config.geometry.thickness_over_ell, model.g());
            let (x, eta) = (model.x(), model.eta());
            let rows: Vec<VarianceBreakdown<f64>> = match sweep.mode {
                NoiseMode::StrongWave => {
                    let flux_ratio = sweep.flux_ratio.ok_or_else(|| {
                        CliError::Usage("strong-wave sweeps need `flux_ratio`".into())
                    })?;
                    StrongWaveSweep {
                        thickness_over_ell: thickness,
                        g,
                        x,
                        eta,
                        nbc: sweep.nbc,
                        flux_ratio,
                    }
                    .curve(&nbs, mode)?
                }
                NoiseMode::Ase => {
                    let s = AseSweep {
                        thickness_over_ell: thickness,
                        g,
                        x,
                        eta,
                        nbc: sweep.nbc,
                    };
                    nbs.par_iter()
                        .map(|&nb| Ok(photocount_variance(&s.model_at(nb)?, mode)?))
                        .collect::<Result<_, CliError>>()?
                }
            };
            t.extend(rows.iter().map(variance_row));
        }
    }
    let mut out = Output::with_model(&model);
    out.tables.push(t);
    Ok(out)
}

pub fn autocorr(config: &RunConfig) -> Result<Output, CliError> {
    let model = config.model()?;
    let tau = model.tau_over_tc();
    let range = config
        .autocorr
        .t_over_tc
        .unwrap_or(Range::logarithmic(2.0 * tau, 1e4 * tau, 100));
    let ts = range.points()?;
    let c_nana = config.autocorr.c_nana;
    let rows: Vec<Vec<f64>> = ts
        .par_iter()
        .map(|&s| Ok(vec![s, photocount_autocorrelation(&model, s, c_nana)?]))
        .collect::<Result<_, CliError>>()?;
    let mut t = Table::new("autocorr", &["t_over_tc", "C_nn"]);
    t.extend(rows);
    let mut out = Output::with_model(&model);
    out.tables.push(t);
    Ok(out)
}

const JOINT_PROCESS_NOTE: &str = "simulation.joint_process: speckle |E|^2 with g1 = sqrt(C1_TT) plus an additive bivariate Gaussian (xi, zeta) with covariance [[C2_TT, C_TV], [C_TV, C_VV]]; only second-order statistics of (T, V) are prescribed";

fn comparison_table(c: &McComparison) -> Table {
    let mut t = Table::new(
        "simulate",
        &["realizations", "estimate", "std_error", "analytic", "z_score", "clamped"],
    );
    t.push(vec![
        c.estimate.realizations as f64,
        c.estimate.value,
        c.estimate.std_error,
        c.analytic.total,
        c.z_score,
        c.clamped as f64,
    ]);
    t
}

fn cache_traces(
    dir: &Path,
    n: usize,
    seed: u64,
    sample: impl Fn(u64) -> SpeckleTrace,
) -> Result<Vec<String>, CliError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let sub = dir.join("traces");
    std::fs::create_dir_all(&sub).map_err(|e| CliError::io(sub.display().to_string(), e))?;
    (0..n as u64)
        .map(|r| {
            let name = format!("traces/trace_{seed}_{r:06}.bin");
            write_trace_path(&sample(r), &dir.join(&name))?;
            Ok(name)
        })
        .collect()
}

pub fn simulate(config: &RunConfig, dir: &Path) -> Result<Output, CliError> {
    let model = config.model()?;
    let sim = &config.simulation;
    let opts = sim.options();
    let mut out = Output::with_model(&model);
    out.seed = Some(sim.seed);
    if sim.steps < 2 {
        return Err(CliError::Usage("simulation.steps must be at least 2".into()));
    }
    let dt = model.tau_over_tc() / (sim.steps - 1) as f64;
    match sim.kind {
        SimulationKind::Oracle | SimulationKind::Semiclassical => {
            let c = if sim.kind == SimulationKind::Oracle {
                quadrature_oracle_nb2(&model, &opts)?
            } else {
                semiclassical_variance(&model, &opts)?
            };
            out.tables.push(comparison_table(&c));
            let traces = JointTraceModel::for_model(&model, sim.steps, sim.mode)?;
            out.files = cache_traces(dir, sim.cache_traces, sim.seed, |r| SpeckleTrace {
                dt,
                values: traces.sample(sim.seed, r).t,
                seed: SeedRecord {
                    seed: sim.seed,
                    realization: r,
                },
            })?;
            out.artifact_choices.push(JOINT_PROCESS_NOTE.into());
        }
        SimulationKind::Siegert => {
            let base = CorrelationArgs::new(model.x(), 0.0, model.a(), model.g());
            let g1 = |s: f64| CorrelationKind::C1TT.evaluate(&base.with_t_over_tc(s)).sqrt();
            let points = siegert_check(g1, dt, sim.steps, &sim.lags, sim.realizations, sim.seed)?;
            let mut t = Table::new(
                "simulate",
                &["lag_over_tc", "empirical", "std_error", "expected", "z_score"],
            );
            t.extend(points.iter().map(|p| {
                vec![p.lag, p.empirical.value, p.empirical.std_error, p.expected, p.z_score]
            }));
            out.tables.push(t);
            let synth = SpeckleSynthesizer::new(g1, dt, sim.steps)?;
            out.files = cache_traces(dir, sim.cache_traces, sim.seed, |r| synth.sample(sim.seed, r))?;
        }
    }
    Ok(out)
}

fn fit_table(r: &FitResult) -> Table {
    let mut cols: Vec<String> = Vec::new();
    let mut row = Vec::new();
    for (i, p) in r.parameters.iter().enumerate() {
        let value = match p.as_str() {
            "g" => r.g,
            "nbc" => r.nbc.unwrap_or(f64::NAN),
            "tc" => r.tc.unwrap_or(f64::NAN),
            "x" => r.x,
            _ => r.scale,
        };
        cols.push(p.clone());
        cols.push(format!("sigma_{p}"));
        row.push(value);
        row.push(r.covariance[i][i].max(0.0).sqrt());
    }
    cols.extend(["residual", "iterations", "condition_number"].map(String::from));
    row.extend([r.residual, r.iterations as f64, r.condition_number]);
    Table {
        name: "fit".into(),
        columns: cols,
        rows: vec![row],
    }
}

pub fn fit(config: &RunConfig, input: Option<&Path>) -> Result<Output, CliError> {
    let model = config.model()?;
    let f = &config.fit;
    let path = input
        .or(f.curve.as_deref())
        .ok_or_else(|| CliError::Usage("fit needs a curve: pass --input or set fit.curve".into()))?;
    let curve = NoiseCurve::read_csv_path(f.kind, path)?;
    let r = match f.kind {
        CurveKind::Variance => {
            let setup = AseSetup {
                thickness_over_ell: config.geometry.thickness_over_ell,
                x: model.x(),
                eta: model.eta(),
            };
            fit_ase_variance(&curve, &setup, &f.options)?
        }
        CurveKind::Autocorrelation => {
            let setup = AutocorrelationSetup {
                x: model.x(),
                fit_x: f.fit_x,
            };
            fit_autocorrelation(&curve, &setup, &f.options)?
        }
    };
    let mut out = Output {
        warnings: r.warnings.iter().map(|w| format!("{w:?}")).collect(),
        artifact_choices: vec![
            "fit.noise_model: least squares on ln(ordinate) (Gaussian in log)".into(),
        ],
        ..Output::default()
    };
    out.tables.push(fit_table(&r));
    let json = serde_json::to_value(&r).map_err(|e| CliError::io("fit result", e))?;
    out.json.push(("fit_result.json".into(), json));
    Ok(out)
}
