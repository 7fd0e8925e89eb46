//! Weak-drive excitation spectrum `S(Delta0)`, normalized to the resonant
//! photon number `E^2 / kappa^2` of the empty cavity.
//!
//! Three evaluations are offered: the sideband (Huang-Rhys) series, direct
//! quadrature of `kappa Re int_0^inf e^{(i Delta - kappa) tau - F_2(tau)} dtau`
//! and the Gaussian bad-cavity lineshape.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{QuadratureSpec, Scaled, SystemParams};
use crate::quad::{integrate, integrate_damped, periodic_sum_factor, Tolerance};
use crate::specfun::bessel_i_scaled;
use crate::spectral::{f2_highq_scaled, f2_kernel, gamma_dephasing, SpectralDensity};

const DEFAULT_TAIL: f64 = 1e-12;
const NEGLIGIBLE_WEIGHT: f64 = 1e-20;
/// Argument below which the sideband weights are summed as a power series.
const SERIES_ARGUMENT: f64 = 15.0;

fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Sideband weight `A_n = e^{-eta^2 (2N+1)} I_n(2 eta^2 sqrt(N(N+1))) ((N+1)/N)^{n/2}`.
///
/// With `a = eta^2 (N+1)` and `b = eta^2 N` the weight is
/// `e^{-(a+b)} sum_k a^{n+k} b^k / (k! (n+k)!)`, which is finite at `N = 0`
/// and reduces to the Poisson weight `e^{-eta^2} eta^{2n} / n!`.
pub fn a_coeff(n: i64, eta: f64, nbar: f64) -> f64 {
    if eta == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let eta2 = eta * eta;
    let a = eta2 * (nbar + 1.0);
    let b = eta2 * nbar;
    // Absorption (n >= 0) and emission (n < 0) swap the roles of a and b.
    let (up, down) = if n >= 0 { (a, b) } else { (b, a) };
    let order = n.unsigned_abs();
    if up == 0.0 {
        return 0.0;
    }
    let x = 2.0 * (a * b).sqrt();
    if x < SERIES_ARGUMENT {
        let mut term = (order as f64 * up.ln() - ln_factorial(order) - (a + b)).exp();
        let mut sum = term;
        let ratio = up * down;
        let mut k = 0.0;
        while term > sum * 1e-17 && ratio > 0.0 {
            k += 1.0;
            term *= ratio / (k * (k + order as f64));
            sum += term;
        }
        sum
    } else {
        // e^{-(a+b)} I_n(x) (a/b)^{n/2} = e^{-(sqrt a - sqrt b)^2} [e^{-x} I_n(x)] (a/b)^{n/2}
        let scaled = bessel_i_scaled(order as i64, x).expect("order and argument within range");
        let gap = a.sqrt() - b.sqrt();
        let log = -gap * gap + 0.5 * n as f64 * (a / b).ln();
        scaled * log.exp()
    }
}

/// Sideband width `kappa_n`: `kappa + Gamma + |n| gamma / 2` for `N <= 1`,
/// `kappa + 2 Gamma` above.
pub fn kappa_n(n: i64, params: &SystemParams) -> f64 {
    let (big_gamma, _) = gamma_dephasing(params);
    if params.nbar() <= 1.0 {
        params.kappa + big_gamma + 0.5 * n.unsigned_abs() as f64 * params.gamma()
    } else {
        params.kappa + 2.0 * big_gamma
    }
}

/// Table of sideband weights and widths over `n_min..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SidebandSeriesA {
    pub n_min: i64,
    pub n_max: i64,
    /// `A_n` for `n = n_min..=n_max`.
    pub weights: Vec<f64>,
    /// `kappa_n` in rad/s for the same indices.
    pub widths: Vec<f64>,
    /// Total weight outside the table.
    pub truncation_error: f64,
}

/// Weights over the full numerically non-negligible range, with suffix sums
/// of the discarded tails.
fn full_weights(eta: f64, nbar: f64) -> (i64, Vec<f64>) {
    let eta2 = eta * eta;
    let mut pos = vec![a_coeff(0, eta, nbar)];
    let mut k = 1;
    loop {
        let w = a_coeff(k, eta, nbar);
        pos.push(w);
        if w < NEGLIGIBLE_WEIGHT && k as f64 > eta2 * (nbar + 1.0) {
            break;
        }
        k += 1;
    }
    let mut neg = Vec::new();
    let mut k = 1;
    loop {
        let w = a_coeff(-k, eta, nbar);
        if w < NEGLIGIBLE_WEIGHT && k as f64 > eta2 * nbar {
            break;
        }
        neg.push(w);
        k += 1;
    }
    let n_min = -(neg.len() as i64);
    let mut all: Vec<f64> = neg.into_iter().rev().collect();
    all.extend(pos);
    (n_min, all)
}

/// Smallest `n_cut` whose discarded weight `sum_{|k| > n_cut} A_k` is below `tail`.
pub fn default_n_cut(eta: f64, nbar: f64, tail: f64) -> usize {
    let (n_min, all) = full_weights(eta, nbar);
    let n_max = n_min + all.len() as i64 - 1;
    let reach = n_max.max(-n_min);
    let weight = |k: i64| -> f64 {
        if k < n_min || k > n_max {
            0.0
        } else {
            all[(k - n_min) as usize]
        }
    };
    let mut outside = 0.0;
    // Walk inwards accumulating the discarded weight.
    for cut in (0..reach).rev() {
        let next = outside + weight(cut + 1) + weight(-(cut + 1));
        if next >= tail {
            return (cut + 1) as usize;
        }
        outside = next;
    }
    1
}

impl SidebandSeriesA {
    /// Builds the table for `n in [-n_cut, n_cut]`; `None` picks the smallest
    /// cut with discarded weight below `1e-12`.
    pub fn new(params: &SystemParams, n_cut: Option<usize>) -> Result<Self> {
        params.validate()?;
        let eta = params.eta();
        let nbar = params.nbar();
        let cut = n_cut.unwrap_or_else(|| default_n_cut(eta, nbar, DEFAULT_TAIL)).max(1) as i64;
        // Suppress exactly-zero emission terms at T = 0.
        let n_min = if nbar == 0.0 { 0 } else { -cut };
        let weights: Vec<f64> = (n_min..=cut).map(|n| a_coeff(n, eta, nbar)).collect();
        let widths = (n_min..=cut).map(|n| kappa_n(n, params)).collect();
        let kept: f64 = weights.iter().sum();
        // Rigorous: the weights are non-negative and sum to one.
        let truncation_error = (1.0 - kept).max(0.0);
        Ok(SidebandSeriesA {
            n_min,
            n_max: cut,
            weights,
            widths,
            truncation_error,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64, f64)> + '_ {
        (self.n_min..=self.n_max)
            .zip(self.weights.iter().zip(&self.widths))
            .map(|(n, (&a, &k))| (n, a, k))
    }

    /// `kappa sum_n A_n k_n / (k_n^2 + (Delta - n omega_m)^2)`; `width` replaces
    /// every `kappa_n` when given.
    pub(crate) fn evaluate(&self, delta: f64, omega_m: f64, kappa: f64, width: Option<f64>) -> f64 {
        self.iter()
            .map(|(n, a, k)| {
                let k = width.unwrap_or(k);
                let d = delta - n as f64 * omega_m;
                a * k / (k * k + d * d)
            })
            .sum::<f64>()
            * kappa
    }
}

/// Spectrum value with the bound on the discarded sideband weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub truncation_error: f64,
}

/// Sideband series for `S(Delta0)` summed over `n in [-n_cut, n_cut]`.
pub fn s_series(delta0: f64, params: &SystemParams, n_cut: Option<usize>) -> Result<SeriesValue> {
    let table = SidebandSeriesA::new(params, n_cut)?;
    let delta = params.shifted_detuning(delta0);
    Ok(SeriesValue {
        value: table.evaluate(delta, params.omega_m, params.kappa, None),
        truncation_error: table.truncation_error,
    })
}

/// `S(Delta0)` by direct quadrature over the delay `tau`.
///
/// Infinite Q uses the exact periodicity of the kernel; `Q >= 100` uses the
/// high-Q closed form; lower Q evaluates the kernel by frequency quadrature.
pub fn s_integral(delta0: f64, params: &SystemParams, spec: &QuadratureSpec) -> Result<f64> {
    params.validate()?;
    spec.validate()?;
    let s = params.scaled();
    let delta = (delta0 + params.delta_g()) / params.omega_m;
    let value = if params.q.is_infinite() {
        s_integral_periodic(delta, &s, spec)?
    } else if params.q >= 100.0 {
        s_integral_damped(delta, &s, spec, |t| Ok(f2_highq_scaled(t, &s)))?
    } else {
        let sd = SpectralDensity::from_params(params)?;
        let w = params.omega_m;
        let temperature = params.temperature;
        s_integral_damped(delta, &s, spec, |t| f2_kernel(t / w, &sd, temperature, spec))?
    };
    Ok(value)
}

fn time_tolerance(kappa: f64, spec: &QuadratureSpec) -> Tolerance {
    // S carries a factor kappa; scale the absolute target accordingly.
    Tolerance::new(spec.abs_tol / kappa, spec.rel_tol)
}

fn panels_per_period(delta: f64, s: &Scaled) -> usize {
    (delta.abs() + s.eta * s.eta * (2.0 * s.nbar + 1.0) + 2.0).ceil() as usize
}

fn s_integral_periodic(delta: f64, s: &Scaled, spec: &QuadratureSpec) -> Result<f64> {
    let a = Complex64::new(-s.kappa, delta);
    let period = 2.0 * PI;
    let one_period = integrate(
        |t| Ok((a * t - f2_highq_scaled(t, s)).exp()),
        0.0,
        period,
        panels_per_period(delta, s),
        time_tolerance(s.kappa, spec),
        spec.max_subdivisions,
    )?;
    Ok(s.kappa * (one_period.value * periodic_sum_factor(a, period)).re)
}

fn s_integral_damped<F>(delta: f64, s: &Scaled, spec: &QuadratureSpec, mut f2: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    let a = Complex64::new(-s.kappa, delta);
    // Re F_2 >= 0 bounds the integrand by e^{-kappa tau}.
    let est = integrate_damped(
        |t| Ok((a * t - f2(t)?).exp()),
        s.kappa + s.big_gamma,
        1.0,
        2.0 * PI,
        panels_per_period(delta, s),
        time_tolerance(s.kappa, spec),
        spec.tau_max,
        spec.max_subdivisions,
    )?;
    Ok(s.kappa * est.value.re)
}

/// Bad-cavity Gaussian lineshape `sqrt(pi) kappa T_phi e^{-Delta0^2 T_phi^2}`.
pub fn s_bad_cavity(delta0: f64, params: &SystemParams) -> Result<f64> {
    params.validate()?;
    if params.g0 == 0.0 {
        return Err(Error::invalid("g0", "bad-cavity lineshape needs g0 > 0"));
    }
    if params.kappa < params.omega_m {
        log::warn!(
            "bad-cavity lineshape used at kappa/omega_m = {}",
            params.kappa / params.omega_m
        );
    }
    let (_, t_phi_inv) = gamma_dephasing(params);
    let t_phi = 1.0 / t_phi_inv;
    let x = delta0 * t_phi;
    Ok(PI.sqrt() * params.kappa * t_phi * (-x * x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_temperature_weights_are_poisson() {
        let eta: f64 = 0.7;
        assert!((a_coeff(0, eta, 0.0) - (-eta * eta).exp()).abs() < 1e-16);
        assert!((a_coeff(3, eta, 0.0) - (-eta * eta).exp() * eta.powi(6) / 6.0).abs() < 1e-16);
        assert_eq!(a_coeff(-1, eta, 0.0), 0.0);
    }

    #[test]
    fn weights_continuous_across_evaluation_branches() {
        // x = 2 sqrt(N(N+1)) equals the switch point at eta = 1.
        let eta = 1.0;
        let n0 = 0.5 * ((1.0 + SERIES_ARGUMENT * SERIES_ARGUMENT).sqrt() - 1.0);
        for k in [-3, 0, 2, 5] {
            let a = a_coeff(k, eta, n0 - 1e-9);
            let b = a_coeff(k, eta, n0 + 1e-9);
            assert!(((a - b) / a).abs() < 1e-9, "k = {k}: {a} vs {b}");
        }
    }

    #[test]
    fn widths_follow_temperature_regimes() {
        let p = SystemParams::dimensionless(0.5, 0.1);
        assert_eq!(kappa_n(7, &p), 0.1);
        let warm = p.with_q(100.0).with_nbar(0.5);
        let (g, _) = gamma_dephasing(&warm);
        assert!((kappa_n(2, &warm) - (0.1 + g + 0.01)).abs() < 1e-15);
        let hot = p.with_q(100.0).with_nbar(10.0);
        let (g, _) = gamma_dephasing(&hot);
        assert!((kappa_n(5, &hot) - (0.1 + 2.0 * g)).abs() < 1e-15);
    }

    #[test]
    fn empty_cavity_is_lorentzian() {
        let p = SystemParams::dimensionless(0.0, 0.2);
        let spec = QuadratureSpec::default();
        for d in [0.0, 0.1, -0.7] {
            let exact = 0.04 / (0.04 + d * d);
            assert!((s_series(d, &p, None).unwrap().value - exact).abs() < 1e-14);
            assert!((s_integral(d, &p, &spec).unwrap() - exact).abs() < 1e-11);
        }
        assert!((s_integral(0.0, &p, &spec).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_cut_meets_tail_target() {
        for (eta, nbar) in [(0.25, 0.0), (1.0, 0.0), (2.0, 5.0)] {
            let cut = default_n_cut(eta, nbar, 1e-12) as i64;
            let kept: f64 = (-cut..=cut).map(|n| a_coeff(n, eta, nbar)).sum();
            assert!(1.0 - kept < 1e-12 + 1e-15);
            let fewer: f64 = (-(cut - 1)..cut).map(|n| a_coeff(n, eta, nbar)).sum();
            assert!(1.0 - fewer >= 1e-12 - 1e-15);
        }
    }

    #[test]
    fn bad_cavity_shape() {
        let p = SystemParams::dimensionless(2.0, 4.0);
        let peak = s_bad_cavity(0.0, &p).unwrap();
        let t_phi = 1.0 / (2.0 * 2.0 * 0.5f64.sqrt());
        assert!((peak - PI.sqrt() * 4.0 * t_phi).abs() < 1e-14);
        let side = s_bad_cavity(1.0 / t_phi, &p).unwrap();
        assert!((side - peak / std::f64::consts::E).abs() < 1e-14);
    }
}
