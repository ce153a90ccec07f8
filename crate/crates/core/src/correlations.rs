//! Classical correlation functions of `T_ab(t)` and `V_b(t)`.
//!
//! All functions use the reduced time `y = sqrt(t/t_c)` and are written in
//! terms of `u = y^2`, `w = u - x^2` and the even kernels of [`crate::branch`]:
//! `K = coth(q)/q`, `H = 1/sinh^2(q)` with `q^2 = w`. In that form
//!
//! ```text
//! F2(x, y)     = [2x(2u - x^2) K - (2xu + w sin 2x) H] / (4xu)
//! g C_TV(t)    = -x cot(x/2)/(2u) + K (1 - x^2/(2u)) - (H/2)(1 - w sin x/(x u))
//! g C_VV(t)    = {2x[u + (x^2 - u) cos x] K - H[2xu + (x^2 - 2u) sin x]
//!                 - x^2 sin x (2 + H)} / (4 x u sin^2(x/2))
//! C1_TT(t)     = [sinh(a q)/sinh(q)]^2 [sin x / sin(a x)]^2
//! ```
//!
//! which never overflows for large `y` and is real on both branches.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::branch::{self, BranchValue, Field};
use crate::model::ValidatedModel;
use crate::scalar::Scalar;

/// Arguments of the correlation functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationArgs<T> {
    /// `L/L_a`.
    pub x: T,
    /// `gamma(t) L = sqrt(t/t_c)`.
    pub y: T,
    /// `ell/L`.
    pub a: T,
    /// Dimensionless conductance.
    pub g: T,
    /// Transverse wavevector mismatch times `L`; zero for the same mode.
    pub dq: T,
}

impl<T: Scalar> CorrelationArgs<T> {
    pub fn new(x: T, y: T, a: T, g: T) -> Self {
        Self {
            x,
            y,
            a,
            g,
            dq: T::zero(),
        }
    }

    /// Arguments for time `t = t_over_tc * t_c` in a validated model.
    pub fn at_time(model: &ValidatedModel<T>, t_over_tc: T) -> Self {
        Self::new(model.x(), t_over_tc.sqrt(), model.a(), model.g())
    }

    pub fn with_y(mut self, y: T) -> Self {
        self.y = y;
        self
    }

    pub fn with_t_over_tc(self, t_over_tc: T) -> Self {
        self.with_y(t_over_tc.sqrt())
    }

    pub fn with_dq(mut self, dq: T) -> Self {
        self.dq = dq;
        self
    }

    /// `u = y^2 = t/t_c`.
    pub fn u(&self) -> T {
        self.y * self.y
    }
}

fn f2_expr<T: Scalar, F: Field<T>>(x: F, u: F) -> F {
    let x2 = x * x;
    let w = u - x2;
    let two = F::real(T::lit(2.0));
    let k = w.coth_over_root();
    let h = w.csch2_root();
    (two * x * (two * u - x2) * k - (two * x * u + w * (two * x).sin()) * h)
        / (F::real(T::lit(4.0)) * x * u)
}

fn ctv_expr<T: Scalar, F: Field<T>>(x: F, u: F) -> F {
    let x2 = x * x;
    let w = u - x2;
    let one = F::real(T::one());
    let two = F::real(T::lit(2.0));
    let half = x * F::real(T::lit(0.5));
    let k = w.coth_over_root();
    let h = w.csch2_root();
    -x * half.cos() / (two * u * half.sin()) + k * (one - x2 / (two * u))
        - h / two * (one - x.sin() * w / (x * u))
}

fn cvv_expr<T: Scalar, F: Field<T>>(x: F, u: F) -> F {
    let x2 = x * x;
    let w = u - x2;
    let two = F::real(T::lit(2.0));
    let k = w.coth_over_root();
    let h = w.csch2_root();
    let sx = x.sin();
    let sh = (x * F::real(T::lit(0.5))).sin();
    let num = two * x * (u + (x2 - u) * x.cos()) * k
        - h * (two * x * u + (x2 - two * u) * sx)
        - x2 * sx * (two + h);
    num / (F::real(T::lit(4.0)) * x * u * sh * sh)
}

fn f2_zero_expr<T: Scalar, F: Field<T>>(x: F) -> F {
    let s = x.sin();
    (F::real(T::lit(2.0)) - x.cos() / (s * x) + F::real(T::one()) / (s * s))
        / F::real(T::lit(4.0))
}

fn ctv_zero_expr<T: Scalar, F: Field<T>>(x: F) -> F {
    let s = x.sin();
    let c = x.cos();
    let three_half = F::real(T::lit(1.5));
    (x / s * (three_half + c) - three_half * c - F::real(T::one()))
        / (F::real(T::lit(2.0)) * x * s)
}

fn cvv_zero_expr<T: Scalar, F: Field<T>>(x: F) -> F {
    let s = x.sin();
    let sh = (x * F::real(T::lit(0.5))).sin();
    let lit = |v: f64| F::real(T::lit(v));
    let num = lit(4.0) * x * (lit(2.0) + x.cos()) - lit(7.0) * s - lit(4.0) * (lit(2.0) * x).sin()
        + (lit(3.0) * x).sin();
    let d = s * sh;
    num / (lit(16.0) * x * d * d)
}

/// `F2(x, y)`, the long-range correlation profile.
pub fn f2<T: Scalar>(x: T, y: T) -> T {
    branch::eval_xu(x, y * y, f2_expr::<T, T>, f2_expr::<T, Complex<T>>)
}

/// `F2(x, y)` tagged with the branch of `sqrt(y^2 - x^2)`.
pub fn f2_branch<T: Scalar>(x: T, y: T) -> BranchValue<T> {
    BranchValue {
        value: f2(x, y),
        branch: branch::classify(x, y * y),
    }
}

/// Equal-time closed form `F2(x, 0)`.
pub fn f2_at_zero<T: Scalar>(x: T) -> T {
    branch::eval_x(x, f2_zero_expr::<T, T>, f2_zero_expr::<T, Complex<T>>)
}

/// Short-range correlation `C1_TT(t)`; exactly zero between different modes.
pub fn c1_tt<T: Scalar>(args: &CorrelationArgs<T>) -> T {
    if args.dq > T::zero() {
        return T::zero();
    }
    let x2 = args.x * args.x;
    let r = (args.u() - x2).sinh_ratio_root(args.a) / (-x2).sinh_ratio_root(args.a);
    r * r
}

/// Long-range correlation `C2_TT(t) = [F2(x, y) + F2(x, sqrt(y^2 + dq^2))]/g`.
pub fn c2_tt<T: Scalar>(args: &CorrelationArgs<T>) -> T {
    let first = f2(args.x, args.y);
    let second = if args.dq == T::zero() {
        first
    } else {
        f2(args.x, (args.u() + args.dq * args.dq).sqrt())
    };
    (first + second) / args.g
}

/// `C_TT(t) = C1_TT(t) + C2_TT(t)`.
pub fn c_tt<T: Scalar>(args: &CorrelationArgs<T>) -> T {
    c1_tt(args) + c2_tt(args)
}

/// Cross correlation `C_TV(t)`; `dq` does not enter.
pub fn c_tv<T: Scalar>(args: &CorrelationArgs<T>) -> T {
    branch::eval_xu(args.x, args.u(), ctv_expr::<T, T>, ctv_expr::<T, Complex<T>>) / args.g
}

/// Equal-time closed form `C_TV(0)`.
pub fn c_tv_at_zero<T: Scalar>(x: T, g: T) -> T {
    branch::eval_x(x, ctv_zero_expr::<T, T>, ctv_zero_expr::<T, Complex<T>>) / g
}

/// Autocorrelation of the spontaneous-emission coefficient `C_VV(t)`.
pub fn c_vv<T: Scalar>(args: &CorrelationArgs<T>) -> T {
    branch::eval_xu(args.x, args.u(), cvv_expr::<T, T>, cvv_expr::<T, Complex<T>>) / args.g
}

/// Equal-time closed form `C_VV(0)`.
pub fn c_vv_at_zero<T: Scalar>(x: T, g: T) -> T {
    branch::eval_x(x, cvv_zero_expr::<T, T>, cvv_zero_expr::<T, Complex<T>>) / g
}

/// Complex-arithmetic evaluation of `F2`, used to audit the real path.
pub fn f2_complex<T: Scalar>(x: T, y: T) -> Complex<T> {
    branch::eval_xu_complex(x, y * y, f2_expr::<T, Complex<T>>)
}

/// Complex-arithmetic evaluation of `g C_TV`.
pub fn c_tv_complex<T: Scalar>(x: T, y: T) -> Complex<T> {
    branch::eval_xu_complex(x, y * y, ctv_expr::<T, Complex<T>>)
}

/// Complex-arithmetic evaluation of `g C_VV`.
pub fn c_vv_complex<T: Scalar>(x: T, y: T) -> Complex<T> {
    branch::eval_xu_complex(x, y * y, cvv_expr::<T, Complex<T>>)
}

/// Complex-arithmetic evaluation of `C1_TT` for the same mode.
pub fn c1_tt_complex<T: Scalar>(x: T, y: T, a: T) -> Complex<T> {
    let xc = Complex::new(x, T::zero());
    let w = Complex::new(y * y, T::zero()) - xc * xc;
    let r = w.sinh_ratio_root(a) / (-(xc * xc)).sinh_ratio_root(a);
    r * r
}

/// The correlation functions entering the photocount statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CorrelationKind {
    /// Short-range part of `C_TT`.
    C1TT,
    /// Long-range part of `C_TT`.
    C2TT,
    /// `C_TT = C1_TT + C2_TT`.
    TT,
    TV,
    VV,
}

impl CorrelationKind {
    pub const ALL: [CorrelationKind; 5] = [
        CorrelationKind::C1TT,
        CorrelationKind::C2TT,
        CorrelationKind::TT,
        CorrelationKind::TV,
        CorrelationKind::VV,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CorrelationKind::C1TT => "C1_TT",
            CorrelationKind::C2TT => "C2_TT",
            CorrelationKind::TT => "C_TT",
            CorrelationKind::TV => "C_TV",
            CorrelationKind::VV => "C_VV",
        }
    }

    pub fn evaluate<T: Scalar>(self, args: &CorrelationArgs<T>) -> T {
        match self {
            CorrelationKind::C1TT => c1_tt(args),
            CorrelationKind::C2TT => c2_tt(args),
            CorrelationKind::TT => c_tt(args),
            CorrelationKind::TV => c_tv(args),
            CorrelationKind::VV => c_vv(args),
        }
    }

    /// Equal-time value from the closed forms.
    pub fn at_zero<T: Scalar>(self, x: T, g: T) -> T {
        match self {
            CorrelationKind::C1TT => T::one(),
            CorrelationKind::C2TT => T::lit(2.0) * f2_at_zero(x) / g,
            CorrelationKind::TT => T::one() + T::lit(2.0) * f2_at_zero(x) / g,
            CorrelationKind::TV => c_tv_at_zero(x, g),
            CorrelationKind::VV => c_vv_at_zero(x, g),
        }
    }

    /// Value tagged with the branch of `sqrt(y^2 - x^2)`.
    pub fn evaluate_branch<T: Scalar>(self, args: &CorrelationArgs<T>) -> BranchValue<T> {
        BranchValue {
            value: self.evaluate(args),
            branch: branch::classify(args.x, args.u()),
        }
    }
}

impl std::str::FromStr for CorrelationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "c1tt" | "c1_tt" | "c1" => Ok(CorrelationKind::C1TT),
            "c2tt" | "c2_tt" | "c2" => Ok(CorrelationKind::C2TT),
            "tt" | "c_tt" => Ok(CorrelationKind::TT),
            "tv" | "c_tv" => Ok(CorrelationKind::TV),
            "vv" | "c_vv" => Ok(CorrelationKind::VV),
            other => Err(format!("unknown correlation kind `{other}`")),
        }
    }
}

/// Evaluates `kind` at every `y` of a grid. Each point is independent.
pub fn evaluate_grid<T: Scalar>(
    kind: CorrelationKind,
    base: &CorrelationArgs<T>,
    ys: &[T],
) -> Vec<T> {
    ys.iter()
        .map(|&y| kind.evaluate(&base.with_y(y)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn equal_time_reference_values() {
        assert!(rel(f2_at_zero(1.0), 0.692_547_577_875_765) < 1e-13);
        assert!(rel(c_tv_at_zero(1.0, 1.0), 0.364_975_041_854_550) < 1e-13);
        assert!(rel(c_vv_at_zero(1.0, 1.0), 0.297_558_871_998_890) < 1e-13);
        assert!(rel(c_vv_at_zero(2.0, 1.0), 0.483_256_969_284_028) < 1e-13);
        assert!(rel(c_vv_at_zero(3.0, 1.0), 13.312_618_550_451_3) < 1e-12);
    }

    #[test]
    fn small_gain_limits() {
        assert!((f2_at_zero(0.0_f64) - 2.0 / 3.0).abs() < 1e-13);
        assert!((c_tv_at_zero(0.0_f64, 1.0) - 1.0 / 3.0).abs() < 1e-13);
        assert!((c_vv_at_zero(0.0_f64, 1.0) - 4.0 / 15.0).abs() < 1e-13);
        assert!((f2(0.0_f64, 0.0) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn general_forms_reduce_to_closed_forms() {
        for &x in &[0.0, 0.05, 0.3, 1.0, 2.0, 3.0] {
            for &y in &[0.0, 1e-8, 1e-6] {
                let a = CorrelationArgs::new(x, y, 0.01, 1.0);
                assert!(rel(f2(x, y), f2_at_zero(x)) < 1e-8, "F2 {x} {y}");
                assert!(rel(c_tv(&a), c_tv_at_zero(x, 1.0)) < 1e-7, "TV {x} {y}");
                assert!(rel(c_vv(&a), c_vv_at_zero(x, 1.0)) < 1e-7, "VV {x} {y}");
            }
        }
    }

    #[test]
    fn short_range_is_one_at_zero() {
        for &x in &[0.0, 0.5, 1.0, 3.0] {
            let a = CorrelationArgs::new(x, 0.0, 0.01, 100.0);
            assert_eq!(c1_tt(&a), 1.0);
        }
        let a = CorrelationArgs::new(1.0, 0.0, 0.01, 100.0).with_dq(0.5);
        assert_eq!(c1_tt(&a), 0.0);
    }

    #[test]
    fn short_range_without_gain() {
        let a = CorrelationArgs::new(0.0, 1.0, 0.01, 100.0);
        let want = ((0.01_f64).sinh() / 1.0_f64.sinh() / 0.01).powi(2);
        assert!(rel(c1_tt(&a), want) < 1e-13);
    }

    #[test]
    fn short_range_tail_rate() {
        // a q >> 1 so that sinh(a q) is in its exponential regime
        let (x, a) = (1.0, 0.1);
        let c = |y: f64| c1_tt(&CorrelationArgs::new(x, y, a, 100.0));
        let (y1, y2) = (150.0, 200.0);
        let q = |y: f64| (y * y - x * x).sqrt();
        let slope = (c(y2) / c(y1)).ln() / (q(y2) - q(y1));
        assert!((slope + 2.0 * (1.0 - a)).abs() < 1e-6);
    }

    #[test]
    fn branch_continuity() {
        for &x in &[0.5, 1.0, 2.0, 3.0] {
            let eps = 1e-6 * x;
            for kind in CorrelationKind::ALL {
                let f = |y: f64| kind.evaluate(&CorrelationArgs::new(x, y, 0.01, 1.0));
                // one-sided linear extrapolations to y = x
                let left = 2.0 * f(x - eps) - f(x - 2.0 * eps);
                let right = 2.0 * f(x + eps) - f(x + 2.0 * eps);
                assert!((right - left).abs() / f(x).abs() < 1e-10, "{kind:?} {x}");
                assert!((left - f(x)).abs() / f(x).abs() < 1e-10, "{kind:?} {x}");
            }
        }
    }

    #[test]
    fn complex_path_is_real_and_agrees() {
        for &x in &[0.0_f64, 0.5, 1.0, 2.0, 3.0] {
            for &y in &[0.0, 0.3, 0.999, 1.7, 5.0, 40.0] {
                let z = f2_complex(x, y);
                assert!(z.im.abs() < 1e-12 * z.re.abs(), "{x} {y} {z}");
                assert!(rel(z.re, f2(x, y)) < 1e-10, "{x} {y}");
                let z = c_vv_complex(x, y);
                assert!(z.im.abs() < 1e-12 * z.re.abs());
                let a = CorrelationArgs::new(x, y, 0.01, 1.0);
                assert!(rel(z.re, c_vv(&a)) < 1e-10, "{x} {y}");
                let z = c_tv_complex(x, y);
                assert!(z.im.abs() < 1e-12 * z.re.abs());
                assert!(rel(z.re, c_tv(&a)) < 1e-10, "{x} {y}");
            }
        }
    }

    #[test]
    fn long_time_asymptote() {
        for &x in &[0.5_f64, 1.0] {
            let y = 100.0;
            let v = c_vv(&CorrelationArgs::new(x, y, 0.01, 1.0)) * y;
            assert!((v - 1.0).abs() < 0.02, "{x} {v}");
        }
        let v = c_vv(&CorrelationArgs::new(1.0, 100.0, 0.01, 1.0)) * 100.0;
        assert!(rel(v, 0.981_862_666_675) < 1e-9);
    }

    #[test]
    fn no_overflow_at_long_times() {
        let a = CorrelationArgs::new(1.0_f64, 1.0e4, 0.01, 100.0);
        for kind in CorrelationKind::ALL {
            assert!(kind.evaluate(&a).is_finite());
        }
        assert!(c1_tt(&a) == 0.0 || c1_tt(&a) < 1e-300);
    }

    #[test]
    fn threshold_pole_order_of_cross_correlation() {
        let p = |e: f64| e * e * c_tv_at_zero(PI - e, 1.0);
        assert!(rel(p(1e-3), p(1e-4)) < 1e-2);
    }

    #[test]
    fn single_precision_tracks_double() {
        for &x in &[0.0_f32, 0.5, 1.0, 2.0] {
            let v32 = c_vv_at_zero(x, 1.0_f32) as f64;
            let v64 = c_vv_at_zero(x as f64, 1.0);
            assert!(rel(v32, v64) < 1e-3, "{x}");
        }
    }
}
