//! Diffusion-approximation mean coefficients of the amplifying slab.
//!
//! With `x = L/L_a` and `a = ell/L`:
//!
//! ```text
//! T_b = sin(a x) / sin x
//! R_b = sin((1 - a) x) / sin x
//! V_b = T_b + R_b - 1 = 2 sin(a x / 2) sin((1 - a) x / 2) / cos(x / 2)
//! ```
//!
//! The product form of `V_b` has no cancellation at small `x`. All three
//! diverge with a simple pole at the lasing threshold `x = pi`.

use serde::{Deserialize, Serialize};

use crate::error::NumericalError;
use crate::model::ValidatedModel;
use crate::scalar::Scalar;

/// Below this gain ratio the ratios are evaluated from their Taylor series.
pub const SERIES_WINDOW: f64 = 1.0e-4;

/// `sin(b x) / sin(x)` through fourth order in `x`.
fn sine_ratio_series<T: Scalar>(b: T, x: T) -> T {
    let x2 = x * x;
    let b2 = b * b;
    let c2 = (T::one() - b2) / T::lit(6.0);
    let c4 = (T::lit(7.0) - T::lit(10.0) * b2 + T::lit(3.0) * b2 * b2) / T::lit(360.0);
    b * (T::one() + x2 * (c2 + x2 * c4))
}

fn sine_ratio<T: Scalar>(b: T, x: T) -> T {
    if x.abs() < T::lit(SERIES_WINDOW) {
        sine_ratio_series(b, x)
    } else {
        (b * x).sin() / x.sin()
    }
}

/// Total transmission `T_b(x, a)`.
pub fn total_transmission<T: Scalar>(x: T, a: T) -> T {
    sine_ratio(a, x)
}

/// Total reflection `R_b(x, a)`.
pub fn total_reflection<T: Scalar>(x: T, a: T) -> T {
    sine_ratio(T::one() - a, x)
}

/// Spontaneous-emission coefficient `V_b(x, a)`.
pub fn ase_coefficient<T: Scalar>(x: T, a: T) -> T {
    let half = T::lit(0.5) * x;
    T::lit(2.0) * (a * half).sin() * ((T::one() - a) * half).sin() / half.cos()
}

#[doc(hidden)]
pub fn total_transmission_series<T: Scalar>(x: T, a: T) -> T {
    sine_ratio_series(a, x)
}

#[doc(hidden)]
pub fn total_transmission_direct<T: Scalar>(x: T, a: T) -> T {
    (a * x).sin() / x.sin()
}

/// `g = (4/3) N a`.
pub fn conductance_of<T: Scalar>(modes: u64, a: T) -> T {
    T::lit(4.0 / 3.0) * T::lit(modes as f64) * a
}

/// Single-channel and total mean transmission `(T_ab, T_b)`.
pub fn mean_transmission<T: Scalar>(model: &ValidatedModel<T>) -> (T, T) {
    let tb = total_transmission(model.x(), model.a());
    (tb / T::lit(model.modes() as f64), tb)
}

pub fn mean_reflection<T: Scalar>(model: &ValidatedModel<T>) -> T {
    total_reflection(model.x(), model.a())
}

pub fn mean_ase<T: Scalar>(model: &ValidatedModel<T>) -> T {
    ase_coefficient(model.x(), model.a())
}

pub fn conductance<T: Scalar>(model: &ValidatedModel<T>) -> T {
    conductance_of(model.modes(), model.a())
}

/// Mean coefficients of a validated model together with the mean photocount.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCoefficients<T> {
    pub tab: T,
    pub tb: T,
    pub rb: T,
    pub vb: T,
    pub g: T,
    /// Transmitted share of the mean photocount, `T_ab n_a`.
    pub transmitted: T,
    /// Spontaneous-emission share, `-eta V_b tau dw / 2 pi`.
    pub emitted: T,
    /// Mean photocount per window.
    pub nb: T,
}

impl<T: Scalar> MeanCoefficients<T> {
    pub fn compute(model: &ValidatedModel<T>) -> Self {
        let (tab, tb) = mean_transmission(model);
        let rb = mean_reflection(model);
        let vb = mean_ase(model);
        let det = model.detection();
        let transmitted = tab * det.na();
        let emitted = -model.eta() * vb * det.tau_domega() / T::TAU();
        Self {
            tab,
            tb,
            rb,
            vb,
            g: conductance(model),
            transmitted,
            emitted,
            nb: transmitted + emitted,
        }
    }

    /// Fraction of photocounts due to amplified spontaneous emission.
    pub fn phi(&self) -> Result<T, NumericalError> {
        if self.nb <= T::zero() {
            return Err(NumericalError::DegenerateNoLight);
        }
        if self.transmitted == T::zero() {
            return Ok(T::one());
        }
        Ok(self.emitted / self.nb)
    }

    /// `T_b + R_b - V_b - 1`, zero up to rounding.
    pub fn conservation_residual(&self) -> T {
        self.tb + self.rb - self.vb - T::one()
    }
}

/// Mean photocount `n_b` and spontaneous-emission fraction `phi`.
pub fn mean_photocount_and_fraction<T: Scalar>(
    model: &ValidatedModel<T>,
) -> Result<(T, T), NumericalError> {
    let c = MeanCoefficients::compute(model);
    Ok((c.nb, c.phi()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DimensionlessBuilder;
    use std::f64::consts::PI;

    #[test]
    fn no_gain_limits() {
        assert_eq!(total_transmission(0.0, 0.01), 0.01);
        assert_eq!(total_reflection(0.0, 0.01), 0.99);
        assert_eq!(ase_coefficient(0.0, 0.01), 0.0);
    }

    #[test]
    fn reference_values() {
        // high-precision direct evaluation
        let t = total_transmission(1.0_f64, 0.01);
        let r = total_reflection(1.0_f64, 0.01);
        let v = ase_coefficient(1.0_f64, 0.01);
        assert!((t - 0.011_883_752_992_920_576).abs() < 1e-15);
        assert!((r - 0.993_529_181_272_222_9).abs() < 1e-15);
        assert!((v - 0.005_412_934_265_143_46).abs() < 1e-15);
    }

    #[test]
    fn small_gain_ase_asymptote() {
        for &a in &[1e-3_f64, 1e-2, 1e-1] {
            for &x in &[1e-6, 1e-4, 1e-3] {
                let v = ase_coefficient(x, a);
                let approx = 0.5 * x * x * a * (1.0 - a);
                assert!((v / approx - 1.0).abs() < x * x, "{x} {a}");
            }
        }
    }

    #[test]
    fn series_and_direct_agree() {
        for &a in &[1e-3_f64, 1e-2, 1e-1] {
            let mut x = 1e-5;
            while x < 1e-3 {
                let s = total_transmission_series(x, a);
                let d = total_transmission_direct(x, a);
                assert!((s / d - 1.0).abs() < 1e-10);
                x *= 1.3;
            }
        }
    }

    #[test]
    fn threshold_pole_is_simple() {
        let a = 0.01;
        // (pi - x) T_b -> sin(a pi), (pi - x) V_b -> sin(a pi) + sin((1-a) pi)
        let eps = 1e-4;
        let t = eps * total_transmission(PI - eps, a);
        let v = eps * ase_coefficient(PI - eps, a);
        assert!((t - 0.031_409_759_623_901_82).abs() < 1e-12);
        assert!((v - 0.062_819_469_749_932_45).abs() < 1e-12);
    }

    #[test]
    fn photocount_limits() {
        let mut b = DimensionlessBuilder {
            thickness_over_ell: 100.0_f64,
            modes: 7500,
            x: 1.0,
            eta: -1.0,
            tau_over_tc: 1.0,
            domega_tc: 1.0e4,
            ia_tc: 1.0e6,
            qa: 0.0,
        };
        let m = b.build().unwrap();
        let (nb, phi) = mean_photocount_and_fraction(&m).unwrap();
        assert!((nb - 10.199_452_848_346_853).abs() < 1e-11);
        assert!((phi - 0.844_648_490_206_717_7).abs() < 1e-13);

        b.ia_tc = 0.0;
        let m = b.build().unwrap();
        let (nb, phi) = mean_photocount_and_fraction(&m).unwrap();
        assert_eq!(phi, 1.0);
        assert!((nb - ase_coefficient(1.0, 0.01) * 1.0e4 / (2.0 * PI)).abs() < 1e-12);

        b.ia_tc = 1.0e6;
        b.eta = 0.0;
        let m = b.build().unwrap();
        let (nb, phi) = mean_photocount_and_fraction(&m).unwrap();
        assert_eq!(phi, 0.0);
        assert_eq!(nb, total_transmission(1.0, 0.01) / 7500.0 * 1.0e6);

        b.ia_tc = 0.0;
        let m = b.build().unwrap();
        assert_eq!(
            mean_photocount_and_fraction(&m),
            Err(NumericalError::DegenerateNoLight)
        );
    }

    #[test]
    fn conductance_examples() {
        assert!((conductance_of(7500, 0.01_f64) - 100.0).abs() < 1e-12);
        assert!((conductance_of(75, 0.01_f64) - 1.0).abs() < 1e-14);
        assert!((conductance_of(1000, 0.1_f64) - 400.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_precision_agrees() {
        let v32 = ase_coefficient(1.0_f32, 0.01);
        let v64 = ase_coefficient(1.0_f64, 0.01);
        assert!((v32 as f64 / v64 - 1.0).abs() < 1e-6);
    }
}
