//! Special functions used by the sideband series.
//!
//! Integer-order modified Bessel functions `I_n(x)`, generalized Laguerre
//! polynomials and the `W_{n,p}(eta) = (-1)^n U(-n, 1-n+p, eta^2)` weights of
//! the two-photon coefficients. Everything here is pure and deterministic.

use crate::error::{Error, Result};

const MAX_BESSEL_ORDER: u64 = 10_000;
const SERIES_LIMIT: f64 = 15.0;
const RESCALE_HIGH: f64 = 1e250;
const RESCALE_FACTOR: f64 = 1e-250;

/// Modified Bessel function of the first kind of integer order.
///
/// Uses the power series below `x = 15` and a normalized downward Miller
/// recurrence above. Returns [`Error::Overflow`] when the value is not
/// representable.
pub fn bessel_i(n: i64, x: f64) -> Result<f64> {
    let order = check_bessel_args(n, x)?;
    if x < SERIES_LIMIT {
        return Ok(bessel_i_series(order, x));
    }
    let scaled = bessel_i_miller_scaled(order, x);
    if scaled == 0.0 {
        return Ok(0.0);
    }
    let log_value = x + scaled.ln();
    if log_value >= f64::MAX.ln() {
        return Err(Error::Overflow(format!("I_{n}({x}) exceeds the f64 range")));
    }
    Ok(scaled * x.exp())
}

/// Exponentially scaled Bessel function `e^{-x} I_n(x)`; never overflows.
pub fn bessel_i_scaled(n: i64, x: f64) -> Result<f64> {
    let order = check_bessel_args(n, x)?;
    if x < SERIES_LIMIT {
        Ok(bessel_i_series(order, x) * (-x).exp())
    } else {
        Ok(bessel_i_miller_scaled(order, x))
    }
}

fn check_bessel_args(n: i64, x: f64) -> Result<u64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::domain(format!("bessel_i needs finite x >= 0, got {x}")));
    }
    let order = n.unsigned_abs();
    if order > MAX_BESSEL_ORDER {
        return Err(Error::domain(format!("bessel_i order |{n}| exceeds {MAX_BESSEL_ORDER}")));
    }
    Ok(order)
}

fn bessel_i_series(n: u64, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut lead = 1.0;
    for k in 1..=n {
        lead *= half / k as f64;
        if lead == 0.0 {
            return 0.0;
        }
    }
    let q = half * half;
    let mut term = lead;
    let mut sum = lead;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + n as f64));
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum
}

/// Miller recurrence normalized by `I_0 + 2 sum_k I_k = e^x`.
fn bessel_i_miller_scaled(n: u64, x: f64) -> f64 {
    let start = n as usize + 30 + (12.0 * x.sqrt()).ceil() as usize;
    let two_over_x = 2.0 / x;
    let mut above = 0.0;
    let mut current = 1.0;
    let mut sum = 2.0;
    let mut result = 0.0;
    for k in (1..=start).rev() {
        let below = k as f64 * two_over_x * current + above;
        above = current;
        current = below;
        let index = k - 1;
        if index as u64 == n {
            result = current;
        }
        sum += if index == 0 { current } else { 2.0 * current };
        if current > RESCALE_HIGH {
            current *= RESCALE_FACTOR;
            above *= RESCALE_FACTOR;
            sum *= RESCALE_FACTOR;
            result *= RESCALE_FACTOR;
        }
    }
    result / sum
}

/// Generalized Laguerre polynomial `L_n^{(alpha)}(x)` by the three-term
/// recurrence.
pub fn laguerre_assoc(n: u32, alpha: f64, x: f64) -> Result<f64> {
    if !alpha.is_finite() || !x.is_finite() {
        return Err(Error::domain("laguerre_assoc needs finite alpha and x"));
    }
    if n > 200 {
        return Err(Error::domain(format!("laguerre_assoc degree {n} exceeds 200")));
    }
    Ok(laguerre_unchecked(n, alpha, x))
}

pub(crate) fn laguerre_unchecked(n: u32, alpha: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `W_{n,p}(eta) / n! = L_n^{(p-n)}(eta^2)`, the form used inside the
/// two-photon coefficients.
///
/// For `p < n` the recurrence at negative integer order cancels badly; the
/// reflection `L_n^{(p-n)}(x) = (-x)^{n-p} p!/n! L_p^{(n-p)}(x)` avoids it.
pub(crate) fn w_over_factorial(n: u32, p: u32, x: f64) -> f64 {
    if p >= n {
        return laguerre_unchecked(n, p as f64 - n as f64, x);
    }
    let falling: f64 = (p + 1..=n).map(f64::from).product();
    let sign = if (n - p) % 2 == 0 { 1.0 } else { -1.0 };
    sign * x.powi((n - p) as i32) / falling * laguerre_unchecked(p, (n - p) as f64, x)
}

/// `W_{n,p}(eta) = (-1)^n U(-n, 1-n+p, eta^2) = n! L_n^{(p-n)}(eta^2)`.
pub fn w_coeff(n: u32, p: u32, eta: f64) -> Result<f64> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::domain(format!("w_coeff needs eta > 0, got {eta}")));
    }
    if n > 100 || p > 100 {
        return Err(Error::domain(format!("w_coeff indices ({n}, {p}) exceed 100")));
    }
    let factorial: f64 = (1..=n).map(f64::from).product();
    Ok(factorial * w_over_factorial(n, p, eta * eta))
}

/// Polynomial with real coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoeffs {
    coefficients: Vec<f64>,
}

impl PolyCoeffs {
    /// Builds a polynomial, dropping trailing zero coefficients.
    pub fn new(mut coefficients: Vec<f64>) -> Self {
        while coefficients.len() > 1 && coefficients.last() == Some(&0.0) {
            coefficients.pop();
        }
        if coefficients.is_empty() {
            coefficients.push(0.0);
        }
        PolyCoeffs { coefficients }
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

/// `W_{n,p}` as a polynomial in `x = eta^2`: the coefficient of `x^j` is
/// `(-1)^j n! C(p, n-j) / j!`.
pub fn w_polynomial(n: u32, p: u32) -> PolyCoeffs {
    let n_fact: f64 = (1..=n).map(f64::from).product();
    let coefficients = (0..=n)
        .map(|j| {
            let k = n - j;
            let binom = if k > p { 0.0 } else { binomial(p, k) };
            let j_fact: f64 = (1..=j).map(f64::from).product();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * n_fact * binom / j_fact
        })
        .collect();
    PolyCoeffs::new(coefficients)
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}
