//! Globally adaptive Gauss–Kronrod (10, 21) quadrature.
//!
//! Intervals are kept in a priority queue keyed by their error estimate;
//! the worst one is bisected until the summed error meets the tolerance or
//! the evaluation budget runs out.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::NumericalError;
use crate::scalar::Scalar;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_793_902,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Evaluations per Kronrod rule.
pub const RULE_POINTS: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evaluations: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1.0e-8,
            abs_tol: 0.0,
            max_evaluations: 1_000_000,
        }
    }
}

impl QuadratureOptions {
    /// Default options with the relative tolerance floored at `50 eps`.
    pub fn for_scalar<T: Scalar>() -> Self {
        let eps = T::epsilon().as_f64();
        Self {
            rel_tol: (50.0 * eps).max(1.0e-8),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult<T> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
}

/// One 21-point Kronrod panel: `(integral, error estimate)`.
fn kronrod<T: Scalar, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let hl = half * (b - a);
    let fc = f(center);
    let mut resk = fc * T::lit(WGK[10]);
    let mut resg = T::zero();
    let mut resabs = resk.abs();
    let mut fv1 = [T::zero(); 10];
    let mut fv2 = [T::zero(); 10];
    for j in 0..10 {
        let dx = hl * T::lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        let w = T::lit(WGK[j]);
        resk = resk + w * (f1 + f2);
        resabs = resabs + w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg = resg + T::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    let reskh = resk * half;
    let mut resasc = T::lit(WGK[10]) * (fc - reskh).abs();
    for j in 0..10 {
        resasc = resasc + T::lit(WGK[j]) * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let result = resk * hl;
    let resabs = resabs * hl.abs();
    let resasc = resasc * hl.abs();
    let mut err = ((resk - resg) * hl).abs();
    if resasc != T::zero() && err != T::zero() {
        let ratio = (T::lit(200.0) * err / resasc).powf(T::lit(1.5));
        err = resasc * ratio.min(T::one());
    }
    let floor = T::lit(50.0) * T::epsilon() * resabs;
    if resabs > T::min_positive_value() / (T::lit(50.0) * T::epsilon()) && floor > err {
        err = floor;
    }
    (result, err)
}

struct Panel<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

impl<T: Scalar> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Panel<T> {}

impl<T: Scalar> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.as_f64().total_cmp(&other.error.as_f64())
    }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<T, F>(
    f: F,
    a: T,
    b: T,
    opts: &QuadratureOptions,
) -> Result<QuadratureResult<T>, NumericalError>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    integrate_with_breakpoints(f, &[a, b], opts)
}

/// Integrates `f` over `[points[0], points[last]]`, starting from one panel
/// per consecutive pair of `points`.
pub fn integrate_with_breakpoints<T, F>(
    mut f: F,
    points: &[T],
    opts: &QuadratureOptions,
) -> Result<QuadratureResult<T>, NumericalError>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    assert!(points.len() >= 2, "need at least one interval");
    let mut heap = BinaryHeap::new();
    let mut done_value = T::zero();
    let mut done_error = T::zero();
    let mut evaluations = 0usize;
    for w in points.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let (value, error) = kronrod(&mut f, w[0], w[1]);
        evaluations += RULE_POINTS;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }
    let tiny = T::lit(1.0e3) * T::epsilon();
    let exact_sums = |heap: &BinaryHeap<Panel<T>>, dv: T, de: T| {
        heap.iter()
            .fold((dv, de), |(v, e), p| (v + p.value, e + p.error))
    };
    let (mut value, mut error) = exact_sums(&heap, done_value, done_error);
    let mut steps = 0usize;
    loop {
        if !value.is_finite() || !error.is_finite() {
            return Err(NumericalError::NonFinite("quadrature integrand"));
        }
        let target = |v: T| T::lit(opts.abs_tol).max(T::lit(opts.rel_tol) * v.abs());
        if error <= target(value) {
            // running sums drift; confirm with exact ones
            let (v, e) = exact_sums(&heap, done_value, done_error);
            value = v;
            error = e;
            if error <= target(value) {
                return Ok(QuadratureResult {
                    value,
                    error,
                    evaluations,
                });
            }
        }
        let failure = |value: T, error: T, evaluations| NumericalError::NumericalFailure {
            estimate: value.as_f64(),
            error: error.as_f64(),
            evaluations,
        };
        // an empty heap means every panel is at the resolution limit
        let worst = heap.pop().ok_or_else(|| failure(value, error, evaluations))?;
        if evaluations + 2 * RULE_POINTS > opts.max_evaluations {
            return Err(failure(value, error, evaluations));
        }
        let mid = T::lit(0.5) * (worst.a + worst.b);
        let scale = worst.a.abs().max(worst.b.abs());
        if (worst.b - worst.a).abs() <= tiny * scale {
            done_value = done_value + worst.value;
            done_error = done_error + worst.error;
            continue;
        }
        value = value - worst.value;
        error = error - worst.error;
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (v, e) = kronrod(&mut f, lo, hi);
            value = value + v;
            error = error + e;
            heap.push(Panel {
                a: lo,
                b: hi,
                value: v,
                error: e,
            });
        }
        evaluations += 2 * RULE_POINTS;
        steps += 1;
        if steps.is_multiple_of(64) {
            let (v, e) = exact_sums(&heap, done_value, done_error);
            value = v;
            error = e;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x: f64| x.powi(7) - 3.0 * x * x, 0.0, 2.0, &Default::default()).unwrap();
        assert!((r.value - (32.0 - 8.0)).abs() < 1e-12);
        assert_eq!(r.evaluations, RULE_POINTS);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &Default::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn oscillatory_with_breakpoints() {
        let pts: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        let r = integrate_with_breakpoints(|x: f64| (5.0 * x).sin(), &pts, &Default::default())
            .unwrap();
        let want = (1.0 - 50.0_f64.cos()) / 5.0;
        assert!((r.value - want).abs() < 1e-10);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let opts = QuadratureOptions {
            max_evaluations: 100,
            ..Default::default()
        };
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, &opts);
        assert!(matches!(r, Err(NumericalError::NumericalFailure { .. })));
    }

    #[test]
    fn single_precision() {
        let opts = QuadratureOptions::for_scalar::<f32>();
        let r = integrate(|x: f32| x.exp(), 0.0, 1.0, &opts).unwrap();
        assert!((r.value - (1.0_f32.exp() - 1.0)).abs() < 1e-5);
    }
}
