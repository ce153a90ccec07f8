//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL
//! line; the process exits nonzero if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use specklamp::coefficients::{ase_coefficient, total_reflection, total_transmission, MeanCoefficients};
use specklamp::correlations::{
    c_tv, c_tv_at_zero, c_vv, c_vv_at_zero, f2, f2_at_zero, CorrelationArgs, CorrelationKind,
};
use specklamp::montecarlo::{quadrature_oracle_nb2, semiclassical_variance, siegert_check, McOptions};
use specklamp::spectroscopy::{fit_ase_variance, fit_ase_variance_batch, AseSetup, FitOptions};
use specklamp::statistics::{
    log_grid, loglog_slope, photocount_autocorrelation, variance_convention_compare,
    windowed_correlation, AseSweep, DynamicsMode, StrongWaveSweep,
};
use specklamp::{CurveKind, DimensionlessBuilder, Model, NoiseCurve};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// The reference operating point: L/ell = 100, g = 100, x = 1, tau = 10 t_c.
fn builder() -> DimensionlessBuilder<f64> {
    DimensionlessBuilder {
        thickness_over_ell: 100.0,
        modes: 7500,
        x: 1.0,
        eta: -1.0,
        tau_over_tc: 10.0,
        domega_tc: 1e3,
        ia_tc: 0.0,
        qa: 0.0,
    }
}

fn conservation() -> Outcome {
    let mut worst: f64 = 0.0;
    for &a in &[1e-3, 1e-2, 1e-1] {
        for i in 0..200 {
            let x = 0.999 * PI * i as f64 / 199.0;
            let r = total_transmission(x, a) + total_reflection(x, a) - ase_coefficient(x, a) - 1.0;
            worst = worst.max(r.abs());
        }
    }
    check(worst < 1e-12, format!("max residual {worst:.1e}"))
}

fn threshold_divergence() -> Outcome {
    let mut worst: f64 = 0.0;
    for &a in &[1e-3, 1e-2, 1e-1] {
        let v = |e: f64| e * ase_coefficient(PI - e, a);
        let t = |e: f64| e * total_transmission(PI - e, a);
        let finite = [v(1e-4), t(1e-4)].iter().all(|p| p.is_finite() && *p > 0.0);
        if !finite {
            return Err(format!("non-finite product at a = {a}"));
        }
        worst = worst.max(rel(v(1e-4), v(1e-3))).max(rel(t(1e-4), t(1e-3)));
    }
    check(worst < 1e-3, format!("max drift {worst:.1e} over (pi - x) in [1e-4, 1e-3]"))
}

fn equal_time_identities() -> Outcome {
    let xs = [0.0, 0.5, 1.0, 2.0, 3.0];
    let c1_exact = xs
        .iter()
        .all(|&x| CorrelationKind::C1TT.evaluate(&CorrelationArgs::new(x, 0.0, 0.01, 100.0)) == 1.0);
    let y = 1e-4;
    let mut limit: f64 = 0.0;
    for &x in &xs {
        let a = CorrelationArgs::new(x, y, 0.01, 1.0);
        limit = limit
            .max(rel(f2(x, y), f2_at_zero(x)))
            .max(rel(c_tv(&a), c_tv_at_zero(x, 1.0)))
            .max(rel(c_vv(&a), c_vv_at_zero(x, 1.0)));
    }
    let mut jump: f64 = 0.0;
    for &x in &[0.5, 1.0, 2.0, 3.0] {
        let e = 1e-6 * x;
        for kind in CorrelationKind::ALL {
            let f = |y: f64| kind.evaluate(&CorrelationArgs::new(x, y, 0.01, 1.0));
            jump = jump.max((f(x + e) - f(x - e)).abs() / f(x).abs());
        }
    }
    let detail = format!(
        "C1(0) exact: {c1_exact}; y -> 0 limits {limit:.1e}; jump across y = x {jump:.1e}"
    );
    check(c1_exact && limit < 1e-6 && jump < 1e-8, detail)
}

fn ase_tail() -> Outcome {
    let g = 100.0;
    let mut corr = (f64::INFINITY, f64::NEG_INFINITY);
    let mut windowed: f64 = 0.0;
    for &x in &[0.5, 1.0] {
        for &t in &[1e4_f64, 1e5, 1e6, 1e8] {
            let v = g * c_vv(&CorrelationArgs::new(x, 0.0, 0.01, g).with_t_over_tc(t)) * t.sqrt();
            corr = (corr.0.min(v), corr.1.max(v));
        }
        for &tau in &[1e4, 1e5, 1e6] {
            let d = windowed_correlation(CorrelationKind::VV, x, 0.01, g, tau).unwrap();
            windowed = windowed.max(rel(d, 8.0 / (3.0 * g) / tau.sqrt()));
        }
    }
    let ok = corr.0 >= 0.98 && corr.1 <= 1.02 && windowed <= 0.05;
    let detail = format!(
        "g C_VV sqrt(t/t_c) in [{:.4}, {:.4}]; windowed max deviation {windowed:.3}",
        corr.0, corr.1
    );
    check(ok, detail)
}

/// Incident flux giving an emitted fraction `phi` at the reference point.
fn model_with_phi(phi: f64) -> Model {
    let mut b = builder();
    if phi == 0.0 {
        b.eta = 0.0;
        b.ia_tc = 1e6;
    } else if phi < 1.0 {
        b.ia_tc = 1.0;
        let c = MeanCoefficients::compute(&b.build().unwrap());
        b.ia_tc = c.emitted * (1.0 - phi) / (phi * c.transmitted);
    }
    b.build().unwrap()
}

fn composition_oracle() -> Outcome {
    let opts = McOptions {
        realizations: 10_000,
        seed: 0,
        ..McOptions::default()
    };
    let mut z = Vec::new();
    for &phi in &[0.0, 0.3, 1.0] {
        let m = model_with_phi(phi);
        let got = MeanCoefficients::compute(&m).phi().unwrap();
        if (got - phi).abs() > 1e-9 {
            return Err(format!("could not set phi = {phi} (got {got})"));
        }
        z.push(quadrature_oracle_nb2(&m, &opts).unwrap().z_score);
    }
    check(
        z.iter().all(|v| v.abs() <= 3.0),
        format!("z at phi = 0, 0.3, 1: {:.2}, {:.2}, {:.2}", z[0], z[1], z[2]),
    )
}

fn semiclassical() -> Outcome {
    let opts = McOptions {
        realizations: 10_000,
        seed: 0,
        ..McOptions::default()
    };
    let mut z = Vec::new();
    for &tau in &[0.1, 1.0, 10.0] {
        let mut b = builder();
        b.eta = 0.0;
        b.tau_over_tc = tau;
        b.ia_tc = 1e7 / tau;
        z.push(semiclassical_variance(&b.build().unwrap(), &opts).unwrap().z_score);
    }
    let base = CorrelationArgs::new(1.0, 0.0, 0.01, 100.0);
    let g1 = |s: f64| CorrelationKind::C1TT.evaluate(&base.with_t_over_tc(s)).sqrt();
    let siegert = siegert_check(g1, 10.0 / 256.0, 257, &[0, 16, 64, 128, 256], 10_000, 0).unwrap();
    let zs = siegert.iter().map(|p| p.z_score.abs()).fold(0.0, f64::max);
    let ok = z.iter().all(|v| v.abs() <= 3.0) && zs <= 3.0;
    let detail = format!(
        "z at tau/t_c = 0.1, 1, 10: {:.2}, {:.2}, {:.2}; Siegert max |z| {zs:.2}",
        z[0], z[1], z[2]
    );
    check(ok, detail)
}

/// Least-squares slope over the decade centred on `centre`.
fn decade_slope(centre: f64, f: impl Fn(f64) -> f64) -> f64 {
    let s = 10f64.sqrt();
    let pts: Vec<(f64, f64)> = log_grid(centre / s, centre * s, 11).into_iter().map(|n| (n, f(n))).collect();
    loglog_slope(&pts)
}

fn regime_slopes() -> Outcome {
    let strong = StrongWaveSweep {
        thickness_over_ell: 100.0,
        g: 100.0,
        x: 1.0,
        eta: -1.0,
        nbc: 10.0,
        flux_ratio: 10.0,
    };
    let ase = AseSweep {
        thickness_over_ell: 100.0,
        g: 100.0,
        x: 1.0,
        eta: -1.0,
        nbc: 10.0,
    };
    let sw = |n: f64| strong.variance_at(n, DynamicsMode::Dynamic).unwrap().total;
    let av = |n: f64| ase.statistics_at(n, DynamicsMode::Dynamic).unwrap().variance;
    let cases = [
        ("strong-wave shot", decade_slope(1e-2, sw), -1.0),
        ("strong-wave classical", decade_slope(1e3, sw), -1.0),
        ("strong-wave long-range", decade_slope(1e8, sw), -0.5),
        ("emission classical", decade_slope(1e-1, av), -1.0),
        ("emission long-range", decade_slope(1e6, av), -0.5),
    ];
    let ok = cases.iter().all(|c| (c.1 - c.2).abs() <= 0.05);
    let detail = cases
        .iter()
        .map(|c| format!("{} {:.3}", c.0, c.1))
        .collect::<Vec<_>>()
        .join("; ");
    check(ok, detail)
}

fn averaging_convention() -> Outcome {
    let mut b = builder();
    b.x = 0.1;
    b.ia_tc = 1e6;
    let c = variance_convention_compare(&b.build().unwrap()).unwrap();
    check(
        c.excess_joint < 0.0 && c.excess_primed > 0.0,
        format!("joint {:.3e}, primed {:.3e}", c.excess_joint, c.excess_primed),
    )
}

fn autocorrelation_limits() -> Outcome {
    let ts = log_grid(20.0, 1e6, 60);
    let pure = model_with_phi(1.0);
    let coherent = model_with_phi(0.0);
    let mut worst: f64 = 0.0;
    for &t in &ts {
        let vv = CorrelationKind::VV.evaluate(&CorrelationArgs::at_time(&pure, t));
        worst = worst.max(rel(photocount_autocorrelation(&pure, t, 0.0).unwrap(), vv));
        let tt = CorrelationKind::TT.evaluate(&CorrelationArgs::at_time(&coherent, t));
        worst = worst.max(rel(photocount_autocorrelation(&coherent, t, 0.0).unwrap(), tt));
    }
    check(worst < 1e-12, format!("max relative deviation {worst:.1e}"))
}

fn fit_recovery() -> Outcome {
    let setup = AseSetup {
        thickness_over_ell: 100.0,
        x: 1.0,
        eta: -1.0,
    };
    let ns = log_grid(1e-2, 1e8, 30);
    let clean = setup.variance(&ns, 100.0, 10.0, 1.0).unwrap();
    let exact = NoiseCurve::new(CurveKind::Variance, ns.clone(), clean.clone()).unwrap();
    let r = fit_ase_variance(&exact, &setup, &FitOptions::default()).unwrap();
    let inversion = rel(r.g, 100.0).max(rel(r.nbc.unwrap(), 10.0));
    let noise = Normal::new(0.0, 0.01).unwrap();
    let curves: Vec<NoiseCurve> = (0..100)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(k);
            let y = clean.iter().map(|v| v * f64::exp(noise.sample(&mut rng))).collect();
            NoiseCurve::new(CurveKind::Variance, ns.clone(), y).unwrap()
        })
        .collect();
    let within = fit_ase_variance_batch(&curves, &setup, &FitOptions::default())
        .into_iter()
        .filter(|f| {
            f.as_ref()
                .is_ok_and(|r| rel(r.g, 100.0) < 0.05 && rel(r.nbc.unwrap(), 10.0) < 0.05)
        })
        .count();
    check(
        inversion < 1e-4 && within >= 90,
        format!("self-inversion {inversion:.1e}; {within} of 100 noisy fits within 5%"),
    )
}

fn run_cli(dir: &Path, threads: &str, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_specklamp"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("SPECKLAMP_THREADS", threads)
        .status()
        .is_ok_and(|s| s.success())
}

/// Every file under `dir` with its path relative to `root`.
fn tree(root: &Path, dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(tree(root, &p));
        } else {
            let name = p.strip_prefix(root).unwrap().display().to_string();
            out.push((name, std::fs::read(&p).unwrap()));
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let configs = [
        r#"{"simulation": {"kind": "oracle", "realizations": 2000, "seed": 11}}"#,
        r#"{"simulation": {"kind": "siegert", "realizations": 500, "seed": 11, "cache_traces": 4}}"#,
    ];
    let root = tempfile::TempDir::new().unwrap();
    for (i, cfg) in configs.iter().enumerate() {
        let path = root.path().join(format!("config{i}.json"));
        std::fs::write(&path, cfg).unwrap();
        let path = path.display().to_string();
        let mut outputs = Vec::new();
        for threads in ["1", "8"] {
            let dir = root.path().join(format!("run{i}_{threads}"));
            if !run_cli(&dir, threads, &["simulate", "--config", &path]) {
                return Err(format!("simulate failed with {threads} threads"));
            }
            outputs.push(tree(&dir, &dir));
        }
        if outputs[0] != outputs[1] {
            return Err(format!("outputs differ between 1 and 8 threads for {cfg}"));
        }
    }
    Ok("simulate outputs byte-identical with 1 and 8 threads".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("conservation law", conservation),
        ("threshold divergence", threshold_divergence),
        ("equal-time identities", equal_time_identities),
        ("emission tail asymptotes", ase_tail),
        ("composition against oracle", composition_oracle),
        ("semiclassical Monte Carlo", semiclassical),
        ("regime slopes", regime_slopes),
        ("averaging convention", averaging_convention),
        ("autocorrelation limits", autocorrelation_limits),
        ("fit recovery", fit_recovery),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        let secs = start.elapsed().as_secs_f64();
        println!("criterion {:>2} {tag} {name} ({secs:.1} s): {detail}", i + 1);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
