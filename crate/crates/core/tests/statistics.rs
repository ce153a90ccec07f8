use specklamp::statistics::{photocount_variance, strong_wave_variance, DynamicsMode};
use specklamp::DimensionlessBuilder;

fn builder(ia_tc: f64) -> DimensionlessBuilder<f64> {
    DimensionlessBuilder {
        thickness_over_ell: 100.0,
        modes: 7500,
        x: 1.0,
        eta: -1.0,
        tau_over_tc: 10.0,
        domega_tc: 1e3,
        ia_tc,
        qa: 0.0,
    }
}

#[test]
fn strong_wave_form_converges_as_emission_fraction_vanishes() {
    // the linearized form drops O(phi) terms, so err/phi must shrink with phi
    let mut prev = f64::INFINITY;
    for k in 2..7 {
        let m = builder(1e5 * 10f64.powi(k)).build().unwrap();
        let sw = strong_wave_variance(&m, DynamicsMode::Dynamic).unwrap();
        let full = photocount_variance(&m, DynamicsMode::Dynamic).unwrap();
        assert!(sw.phi < 0.1 && !sw.phi_warning);
        let err = (sw.total / full.total - 1.0).abs();
        assert!(err < sw.phi, "phi {} err {err}", sw.phi);
        assert!(err / sw.phi < prev);
        prev = err / sw.phi;
    }
}

#[test]
fn strong_wave_form_flags_large_emission_fraction() {
    let m = builder(1e5).build().unwrap();
    assert!(strong_wave_variance(&m, DynamicsMode::Dynamic).unwrap().phi_warning);
}
