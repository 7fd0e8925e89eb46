//! Adaptive Gauss-Kronrod quadrature for complex integrands, plus the
//! period-by-period summation used for the damped oscillatory time integrals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

// 21-point Kronrod nodes on [0, 1]; odd indices are the 10-point Gauss nodes.
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
    0.123_491_976_262_065_851_077_600_525_175_854,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Absolute/relative error target: `err <= max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }

    fn target(&self, value: Complex64) -> f64 {
        self.abs.max(self.rel * value.norm())
    }
}

/// Integral value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F>(f: &mut F, a: f64, b: f64) -> Result<(Complex64, f64)>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[10];
    let mut gauss = Complex64::new(0.0, 0.0);
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = f(center - dx)? + f(center + dx)?;
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    let error = (kronrod - gauss).norm();
    if !kronrod.re.is_finite() || !kronrod.im.is_finite() {
        return Err(Error::domain(format!("non-finite integrand on [{a}, {b}]")));
    }
    Ok((kronrod, error))
}

/// Adaptive Gauss-Kronrod (G10/K21) integration of a complex integrand over
/// `[a, b]`, starting from `panels` equal sub-intervals.
///
/// The integrand may fail; its error is propagated unchanged.
pub fn integrate<F>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    tol: Tolerance,
    max_subdivisions: usize,
) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    if a == b {
        return Ok(Estimate {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            evaluations: 0,
        });
    }
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut heap = BinaryHeap::with_capacity(panels + max_subdivisions);
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut evaluations = 0;
    for k in 0..panels {
        let lo = a + k as f64 * width;
        let hi = if k + 1 == panels { b } else { lo + width };
        let (v, e) = gk21(&mut f, lo, hi)?;
        evaluations += 21;
        value += v;
        error += e;
        heap.push(Panel { a: lo, b: hi, value: v, error: e });
    }
    let mut splits = 0;
    while error > tol.target(value) {
        if splits >= max_subdivisions {
            return Err(Error::Convergence {
                context: format!("quadrature on [{a}, {b}]"),
                estimate: value.norm(),
                error,
                subdivisions: splits,
            });
        }
        let worst = heap.pop().expect("heap holds every panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel no longer divisible in floating point; accept its estimate.
            error -= worst.error;
            heap.push(Panel { error: 0.0, ..worst });
            continue;
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid)?;
        let (v2, e2) = gk21(&mut f, mid, worst.b)?;
        evaluations += 42;
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        splits += 1;
    }
    // Re-sum to shed the drift of the incremental updates.
    let value = heap.iter().fold(Complex64::new(0.0, 0.0), |acc, p| acc + p.value);
    Ok(Estimate { value, error, evaluations })
}

/// Integral over `[0, inf)` of an oscillating integrand bounded in modulus by
/// `scale * e^{-decay_rate * tau}`, summed one `period` at a time.
///
/// Summation stops once the rigorous tail bound `scale e^{-r tau}/r` and the
/// last period's contribution both fall below the absolute tolerance.
pub fn integrate_damped<F>(
    mut f: F,
    decay_rate: f64,
    scale: f64,
    period: f64,
    panels_per_period: usize,
    tol: Tolerance,
    tau_max: f64,
    max_subdivisions: usize,
) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    if !(decay_rate > 0.0) {
        return Err(Error::domain("damped integral needs a positive decay rate"));
    }
    let mut total = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut evaluations = 0;
    let mut k = 0usize;
    loop {
        let lo = k as f64 * period;
        let hi = lo + period;
        let seg = integrate(&mut f, lo, hi, panels_per_period, tol, max_subdivisions)?;
        total += seg.value;
        error += seg.error;
        evaluations += seg.evaluations;
        k += 1;
        let tail = scale * (-decay_rate * hi).exp() / decay_rate;
        let target = tol.target(total);
        if tail < target && seg.value.norm() < target.max(tol.abs) {
            return Ok(Estimate { value: total, error: error + tail, evaluations });
        }
        if hi >= tau_max {
            return Err(Error::Convergence {
                context: format!("damped time integral reached tau_max = {tau_max}"),
                estimate: total.norm(),
                error: error + tail,
                subdivisions: k,
            });
        }
    }
}

/// `1 / (1 - e^{exponent * period})`: sums `e^{exponent * k period}` over all
/// periods of an exactly periodic integrand.
pub fn periodic_sum_factor(exponent: Complex64, period: f64) -> Complex64 {
    let z = exponent * period;
    // 1 - e^z computed as -expm1(z) to keep precision for small |z|.
    let expm1 = Complex64::new(
        z.re.exp_m1() * z.im.cos() - 2.0 * (0.5 * z.im).sin().powi(2),
        z.re.exp() * z.im.sin(),
    );
    Complex64::new(1.0, 0.0) / -expm1
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ok(v: Complex64) -> Result<Complex64> {
        Ok(v)
    }

    #[test]
    fn kronrod_weights_sum_to_two() {
        let total: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        assert!((total - 2.0).abs() < 1e-15);
        let gauss: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((gauss - 2.0).abs() < 1e-15);
    }

    #[test]
    fn polynomial_and_oscillatory_integrals() {
        let tol = Tolerance::new(1e-14, 1e-13);
        let est = integrate(|x| ok(Complex64::new(x.powi(5), 0.0)), 0.0, 2.0, 1, tol, 100).unwrap();
        assert!((est.value.re - 64.0 / 6.0).abs() < 1e-13);

        let est = integrate(|x| ok(Complex64::new(0.0, x).exp()), 0.0, 50.0, 1, tol, 500).unwrap();
        let exact = (Complex64::new(0.0, 50.0).exp() - 1.0) / Complex64::new(0.0, 1.0);
        assert!((est.value - exact).norm() < 1e-12);
    }

    #[test]
    fn endpoint_singularity_converges() {
        let tol = Tolerance::new(1e-10, 1e-10);
        let est = integrate(|x| ok(Complex64::new(1.0 / x.sqrt(), 0.0)), 0.0, 1.0, 1, tol, 500).unwrap();
        assert!((est.value.re - 2.0).abs() < 1e-9);
    }

    #[test]
    fn subdivision_budget_is_enforced() {
        let tol = Tolerance::new(1e-15, 1e-15);
        let r = integrate(|x| ok(Complex64::new((1.0 / x).sin(), 0.0)), 1e-6, 1.0, 1, tol, 5);
        assert!(matches!(r, Err(Error::Convergence { .. })));
    }

    #[test]
    fn damped_lorentzian() {
        // int_0^inf e^{(i d - k) t} dt = 1 / (k - i d)
        let (k, d) = (0.05, 0.3);
        let a = Complex64::new(-k, d);
        let tol = Tolerance::new(1e-14, 1e-12);
        let est = integrate_damped(|t| ok((a * t).exp()), k, 1.0, 2.0 * PI, 2, tol, 1e6, 200).unwrap();
        let exact = Complex64::new(1.0, 0.0) / Complex64::new(k, -d);
        assert!((est.value - exact).norm() < 1e-11 * exact.norm());
    }

    #[test]
    fn periodic_factor_matches_geometric_series() {
        let a = Complex64::new(-0.1, 0.7);
        let p = 2.0 * PI;
        let direct: Complex64 = (0..2000).map(|k| (a * (k as f64 * p)).exp()).sum();
        assert!((periodic_sum_factor(a, p) - direct).norm() < 1e-12);
    }
}
