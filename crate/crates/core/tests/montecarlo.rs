use specklamp::coefficients::MeanCoefficients;
use specklamp::correlations::{CorrelationArgs, CorrelationKind};
use specklamp::montecarlo::{
    cox_count, quadrature_oracle_nb2, semiclassical_variance, siegert_check, stream_rng,
    windowed_variance_empirical, GaussianSynthesizer, McOptions, SpeckleSynthesizer, StreamRole,
};
use specklamp::statistics::{windowed_variance, DynamicsMode};
use specklamp::{DimensionlessBuilder, Model};

fn model(eta: f64, ia_tc: f64, tau: f64) -> Model {
    DimensionlessBuilder {
        thickness_over_ell: 100.0,
        modes: 7500,
        x: 1.0,
        eta,
        tau_over_tc: tau,
        domega_tc: 1e3,
        ia_tc,
        qa: 0.0,
    }
    .build()
    .unwrap()
}

/// Incident flux times `t_c` giving about 16 counts per `t_c`.
const FLUX: f64 = 1e7;

fn opts(realizations: usize, seed: u64) -> McOptions {
    McOptions {
        realizations,
        seed,
        ..McOptions::default()
    }
}

#[test]
fn exponential_process_windowed_variance() {
    let (dt, tau) = (1.0 / 64.0, 1.0);
    let synth = GaussianSynthesizer::new(1, dt, 65, |t| vec![(-t.abs()).exp()]).unwrap();
    let traces: Vec<Vec<f64>> = (0..10_000)
        .map(|r| {
            let mut rng = stream_rng(3, r, StreamRole::LongRange);
            synth.sample(&mut rng)[0].iter().map(|v| 1.0 + 0.3 * v).collect()
        })
        .collect();
    let est = windowed_variance_empirical(&traces, dt, tau).unwrap();
    let want = 0.09 * windowed_variance(|u: f64| (-u).exp(), tau).unwrap();
    assert!((est.value - want).abs() < 3.0 * est.std_error, "{est:?} {want}");
    assert!((est.value / want - 1.0).abs() < 0.05);
}

#[test]
fn speckle_intensity_obeys_siegert() {
    let base = CorrelationArgs::new(1.0, 0.0, 0.01, 100.0);
    let g1 = |s: f64| CorrelationKind::C1TT.evaluate(&base.with_t_over_tc(s)).sqrt();
    let points = siegert_check(g1, 10.0 / 256.0, 257, &[0, 16, 64, 128], 4000, 1).unwrap();
    for p in points {
        assert!(p.z_score.abs() < 3.0, "{p:?}");
    }
}

#[test]
fn frozen_speckle_counts_are_bose_einstein_at_the_window_scale() {
    // a single window much shorter than t_c sees a frozen intensity
    let synth = SpeckleSynthesizer::new(|t: f64| (-t.abs()).exp(), 1e-4, 3).unwrap();
    let (flux, tau) = (50.0, 2e-4);
    let counts: Vec<f64> = (0..20_000)
        .map(|r| cox_count(&synth.sample(5, r), flux / tau, tau, 5).unwrap().counts[0] as f64)
        .collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // Bose-Einstein: var = n + n^2
    let want = mean + mean * mean;
    assert!((var / want - 1.0).abs() < 0.05, "{var} {want}");
}

#[test]
fn semiclassical_counting_matches_shot_plus_intensity_noise() {
    for &tau in &[0.1, 1.0, 10.0] {
        let m = model(0.0, FLUX / tau, tau);
        let c = semiclassical_variance(&m, &opts(10_000, 1)).unwrap();
        assert!(c.within(3.0), "tau {tau}: {c:?}");
        // a dark speckle plus a negative long-range term can dip below zero
        assert!(c.clamped < 500, "{}", c.clamped);
    }
}

#[test]
fn semiclassical_rejects_spontaneous_emission() {
    assert!(semiclassical_variance(&model(-1.0, 10.0, 1.0), &opts(100, 0)).is_err());
}

#[test]
fn oracle_without_emission_and_in_static_mode() {
    let c = quadrature_oracle_nb2(&model(0.0, 10.0, 10.0), &opts(10_000, 2)).unwrap();
    assert!(c.within(3.0), "{c:?}");
    let o = McOptions {
        mode: DynamicsMode::Static,
        ..opts(10_000, 2)
    };
    let m = model(-1.0, 1.0, 10.0);
    assert!(MeanCoefficients::compute(&m).phi().unwrap() > 0.0);
    let c = quadrature_oracle_nb2(&m, &o).unwrap();
    assert!(c.within(3.0), "{c:?}");
}

#[test]
fn standard_error_scales_as_inverse_root_of_ensemble() {
    let m = model(0.0, FLUX, 1.0);
    let small = semiclassical_variance(&m, &opts(2_500, 4)).unwrap();
    let large = semiclassical_variance(&m, &opts(10_000, 4)).unwrap();
    let ratio = small.estimate.std_error / large.estimate.std_error;
    assert!((ratio / 2.0).ln().abs() < 1.5f64.ln(), "{ratio}");
}

#[test]
fn precision_target_is_enforced() {
    let o = McOptions {
        max_rel_error: Some(1e-6),
        ..opts(200, 0)
    };
    assert!(semiclassical_variance(&model(0.0, FLUX, 1.0), &o).is_err());
}
