//! Branch-safe kernels in `w = y^2 - x^2` and removable-singularity handling.
//!
//! The correlation functions are built from even functions of
//! `q = sqrt(w)`: `coth(q)/q`, `1/sinh^2(q)` and `sinh(b q)/sinh(q)`. For
//! `w < 0` the square root is imaginary and the hyperbolic functions turn
//! into trigonometric ones; since all kernels are even in `q`, the result is
//! real on both sides of `w = 0`.
//!
//! The combinations that appear in the correlation functions have removable
//! singularities at `y = 0`, at `y = x` and at `x = 0`, where individually
//! large terms cancel. Near those points the function is evaluated as the
//! mean of its values on a small circle in the complex plane around the
//! requested point. This is exact for analytic functions (mean-value
//! property) and the periodic trapezoid rule converges geometrically with
//! rate `radius / (distance to nearest pole)`.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Number of nodes on every averaging circle.
pub const CIRCLE_NODES: usize = 32;

/// Largest averaging radius in `u = y^2`.
const U_RADIUS_MAX: f64 = 0.5;

/// Gain ratios below this are evaluated through a circle in `x`.
pub const X_WINDOW: f64 = 0.1;

const X_RADIUS_MAX: f64 = 0.5;

/// Which side of `y = x` an evaluation falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// `y < x`: imaginary `sqrt(y^2 - x^2)`, trigonometric kernels.
    Oscillatory,
    /// `y > x`: real `sqrt(y^2 - x^2)`, hyperbolic kernels.
    Hyperbolic,
    /// `|y^2 - x^2|` inside the removable-singularity window.
    Transition,
}

/// A real value tagged with the branch used to compute it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchValue<T> {
    pub value: T,
    pub branch: Branch,
}

/// Arithmetic needed by the closed forms, over reals or complex numbers.
pub trait Field<T: Scalar>:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn real(v: T) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    /// `coth(q)/q` with `q^2 = self`.
    fn coth_over_root(self) -> Self;
    /// `1/sinh^2(q)` with `q^2 = self`.
    fn csch2_root(self) -> Self;
    /// `sinh(b q)/sinh(q)` with `q^2 = self`.
    fn sinh_ratio_root(self, b: T) -> Self;
}

impl<T: Scalar> Field<T> for T {
    #[inline]
    fn real(v: T) -> Self {
        v
    }

    #[inline]
    fn sin(self) -> Self {
        num_traits::Float::sin(self)
    }

    #[inline]
    fn cos(self) -> Self {
        num_traits::Float::cos(self)
    }

    fn coth_over_root(self) -> Self {
        if self > T::zero() {
            let q = self.sqrt();
            let m = (-(q + q)).exp_m1();
            (T::lit(2.0) + m) / (-m * q)
        } else {
            let k = (-self).sqrt();
            -k.cos() / (k * k.sin())
        }
    }

    fn csch2_root(self) -> Self {
        if self > T::zero() {
            let q = self.sqrt();
            let m = (-(q + q)).exp_m1();
            T::lit(4.0) * (-(q + q)).exp() / (m * m)
        } else {
            let s = (-self).sqrt().sin();
            -T::one() / (s * s)
        }
    }

    fn sinh_ratio_root(self, b: T) -> Self {
        if self > T::zero() {
            let q = self.sqrt();
            let two = T::lit(2.0);
            (-(T::one() - b) * q).exp() * (-two * b * q).exp_m1() / (-two * q).exp_m1()
        } else if self < T::zero() {
            let k = (-self).sqrt();
            (b * k).sin() / k.sin()
        } else {
            b
        }
    }
}

impl<T: Scalar> Field<T> for Complex<T> {
    #[inline]
    fn real(v: T) -> Self {
        Complex::new(v, T::zero())
    }

    #[inline]
    fn sin(self) -> Self {
        Complex::sin(self)
    }

    #[inline]
    fn cos(self) -> Self {
        Complex::cos(self)
    }

    fn coth_over_root(self) -> Self {
        let q = self.sqrt();
        if q.norm() <= T::one() {
            q.cosh() / (q.sinh() * q)
        } else {
            let e = (-(q + q)).exp();
            let one = Complex::real(T::one());
            (one + e) / ((one - e) * q)
        }
    }

    fn csch2_root(self) -> Self {
        let q = self.sqrt();
        if q.norm() <= T::one() {
            let s = q.sinh();
            Complex::real(T::one()) / (s * s)
        } else {
            let e = (-(q + q)).exp();
            let d = Complex::real(T::one()) - e;
            e * T::lit(4.0) / (d * d)
        }
    }

    fn sinh_ratio_root(self, b: T) -> Self {
        let q = self.sqrt();
        if q.norm() <= T::one() {
            if q.norm() == T::zero() {
                return Complex::real(b);
            }
            (q * b).sinh() / q.sinh()
        } else {
            let one = Complex::real(T::one());
            let two = T::lit(2.0);
            (-(q * (T::one() - b))).exp() * (one - (-(q * (two * b))).exp())
                / (one - (-(q * two)).exp())
        }
    }
}

/// Mean of `f` over a circle of `radius` around `center`.
pub fn circle_mean<T, F>(center: Complex<T>, radius: T, f: F) -> Complex<T>
where
    T: Scalar,
    F: Fn(Complex<T>) -> Complex<T>,
{
    let n = CIRCLE_NODES;
    let mut acc = Complex::new(T::zero(), T::zero());
    for k in 0..n {
        let theta = T::TAU() * T::lit(k as f64 + 0.5) / T::lit(n as f64);
        acc = acc + f(center + Complex::from_polar(radius, theta));
    }
    acc / T::lit(n as f64)
}

/// Averaging radius in `u` and whether `u` lies inside the removable window.
///
/// The poles nearest to the real `u` axis sit at `u = x^2 - pi^2`; the
/// removable points are `u = 0` and `u = x^2`. Among three candidate radii
/// at least one keeps every removable point at a distance of at least half
/// a radius from the circle.
fn u_radius<T: Scalar>(x: Complex<T>, u: T) -> Option<T> {
    let uc = Complex::real(u);
    let x2 = x * x;
    let pi2 = T::PI() * T::PI();
    let reach = (uc - x2 + Complex::real(pi2)).norm();
    let rho0 = (reach / T::lit(4.0)).min(T::lit(U_RADIUS_MAX));
    let dists = [uc.norm(), (uc - x2).norm()];
    let window = rho0 / T::lit(8.0);
    if dists.iter().all(|&d| d >= window) {
        return None;
    }
    let half = T::lit(0.5);
    let mut rho = rho0;
    for _ in 0..3 {
        if dists
            .iter()
            .all(|&d| d <= half * rho || d >= T::lit(1.5) * rho)
        {
            return Some(rho);
        }
        rho = rho * half;
    }
    Some(rho0 * T::lit(0.25))
}

/// Whether `(x, u)` falls inside the `y = x` transition window.
pub fn is_transition<T: Scalar>(x: T, u: T) -> bool {
    let xc = Complex::real(x);
    match u_radius(xc, u) {
        Some(_) => {
            let x2 = x * x;
            (u - x2).abs() < u.abs() || u > T::zero() && (u - x2).abs() <= T::lit(1e-300)
        }
        None => false,
    }
}

/// Evaluates a two-variable closed form at complex `x` and real `u`,
/// averaging in `u` whenever `u` is close to a removable point.
fn eval_u_complex<T, E>(x: Complex<T>, u: T, expr: &E) -> Complex<T>
where
    T: Scalar,
    E: Fn(Complex<T>, Complex<T>) -> Complex<T>,
{
    match u_radius(x, u) {
        None => expr(x, Complex::real(u)),
        Some(rho) => circle_mean(Complex::real(u), rho, |uc| expr(x, uc)),
    }
}

/// Regularized evaluation of `f(x, u)` for real `x >= 0`, `u >= 0`.
///
/// `real` and `complex` must be the same closed form instantiated over
/// `T` and `Complex<T>`.
pub fn eval_xu<T, R, C>(x: T, u: T, real: R, complex: C) -> T
where
    T: Scalar,
    R: Fn(T, T) -> T,
    C: Fn(Complex<T>, Complex<T>) -> Complex<T>,
{
    if x.abs() < T::lit(X_WINDOW) {
        let rho = ((T::PI() - x.abs()) / T::lit(4.0)).min(T::lit(X_RADIUS_MAX));
        return circle_mean(Complex::real(x), rho, |xc| eval_u_complex(xc, u, &complex)).re;
    }
    match u_radius(Complex::real(x), u) {
        None => real(x, u),
        Some(rho) => {
            let xc = Complex::real(x);
            circle_mean(Complex::real(u), rho, |uc| complex(xc, uc)).re
        }
    }
}

/// Complex-arithmetic evaluation path, without the real-kernel shortcut.
///
/// Used to cross-check the real path; the imaginary part measures the
/// realness residue.
pub fn eval_xu_complex<T, C>(x: T, u: T, complex: C) -> Complex<T>
where
    T: Scalar,
    C: Fn(Complex<T>, Complex<T>) -> Complex<T>,
{
    if x.abs() < T::lit(X_WINDOW) {
        let rho = ((T::PI() - x.abs()) / T::lit(4.0)).min(T::lit(X_RADIUS_MAX));
        return circle_mean(Complex::real(x), rho, |xc| eval_u_complex(xc, u, &complex));
    }
    eval_u_complex(Complex::real(x), u, &complex)
}

/// Regularized evaluation of a single-variable closed form `f(x)` with a
/// removable singularity at `x = 0`.
pub fn eval_x<T, R, C>(x: T, real: R, complex: C) -> T
where
    T: Scalar,
    R: Fn(T) -> T,
    C: Fn(Complex<T>) -> Complex<T>,
{
    if x.abs() < T::lit(X_WINDOW) {
        let rho = ((T::PI() - x.abs()) / T::lit(4.0)).min(T::lit(X_RADIUS_MAX));
        circle_mean(Complex::real(x), rho, complex).re
    } else {
        real(x)
    }
}

/// Branch tag for `(x, u = y^2)`.
pub fn classify<T: Scalar>(x: T, u: T) -> Branch {
    let w = u - x * x;
    let xc = Complex::real(x);
    let uc = Complex::real(u);
    let x2 = xc * xc;
    let reach = (uc - x2 + Complex::real(T::PI() * T::PI())).norm();
    let window = (reach / T::lit(4.0)).min(T::lit(U_RADIUS_MAX)) / T::lit(8.0);
    if w.abs() < window {
        Branch::Transition
    } else if w < T::zero() {
        Branch::Oscillatory
    } else {
        Branch::Hyperbolic
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn real_kernels_match_complex() {
        for &w in &[-9.0, -4.0, -1.0, -0.3, 0.2, 1.0, 5.0, 30.0, 400.0] {
            let c = Complex::new(w, 0.0_f64);
            assert!(rel(w.coth_over_root(), c.coth_over_root().re) < 1e-13, "{w}");
            assert!(rel(w.csch2_root(), c.csch2_root().re) < 1e-12, "{w}");
            assert!(rel(w.sinh_ratio_root(0.3), c.sinh_ratio_root(0.3).re) < 1e-13, "{w}");
            assert!(c.coth_over_root().im.abs() < 1e-14 * c.coth_over_root().norm());
        }
    }

    #[test]
    fn kernels_do_not_overflow() {
        let w = 1.0e8_f64;
        assert!((w.coth_over_root() - 1e-4).abs() < 1e-18);
        assert_eq!(w.csch2_root(), 0.0);
        assert!(w.sinh_ratio_root(0.5).is_finite());
        let c = Complex::new(w, 0.0);
        assert!(c.coth_over_root().re.is_finite());
    }

    #[test]
    fn sinh_ratio_is_continuous_through_zero() {
        let b = 0.01_f64;
        let lo = (-1e-14_f64).sinh_ratio_root(b);
        let hi = (1e-14_f64).sinh_ratio_root(b);
        assert!(rel(lo, hi) < 1e-12);
        assert!(rel(lo, b) < 1e-10);
    }

    #[test]
    fn circle_mean_recovers_removable_value() {
        // (exp(z) - 1)/z at z = 0 equals 1
        let m = circle_mean(Complex::new(0.0_f64, 0.0), 0.5, |z| (z.exp() - 1.0) / z);
        assert!((m.re - 1.0).abs() < 1e-15);
        assert!(m.im.abs() < 1e-15);
        let z0 = 1e-9;
        let m = circle_mean(Complex::new(z0, 0.0_f64), 0.5, |z| (z.exp() - 1.0) / z);
        assert!(rel(m.re, (z0.exp_m1()) / z0) < 1e-14);
    }

    #[test]
    fn regularized_two_variable_form() {
        // (sin(x + u) - sin x) / u has a removable point at u = 0
        let real = |x: f64, u: f64| ((x + u).sin() - x.sin()) / u;
        let cplx = |x: Complex<f64>, u: Complex<f64>| ((x + u).sin() - x.sin()) / u;
        for &x in &[0.0, 0.05, 0.5, 2.0] {
            for &u in &[0.0, 1e-12, 1e-6, 1e-3, 0.3, 2.0] {
                let got = eval_xu(x, u, real, cplx);
                let want = if u == 0.0 {
                    x.cos()
                } else {
                    2.0 * (0.5 * u).sin() * (x + 0.5 * u).cos() / u
                };
                assert!((got - want).abs() < 1e-13, "{x} {u} {got} {want}");
            }
        }
    }

    #[test]
    fn classification() {
        assert_eq!(classify(1.0, 0.25), Branch::Oscillatory);
        assert_eq!(classify(1.0, 4.0), Branch::Hyperbolic);
        assert_eq!(classify(1.0, 1.0 + 1e-9), Branch::Transition);
    }
}
