//! Equal-time two-photon correlation `g2(0) = G2 / S^2` at weak drive.
//!
//! `G2` comes either from the triple sideband series over the coefficients
//! `B_{n,m,p}` of
//!
//! ```text
//! e^{-F_4(t1, t2, t3)} = sum_{n,m,p} B_{n,m,p} e^{i omega_m (t2 n - t3 m - t1 p)}
//! ```
//!
//! or from direct quadrature of the triple delay integral. Both routes assume
//! an undamped mechanical mode (infinite Q).

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::params::{QuadratureSpec, SystemParams};
use crate::quad::{integrate, periodic_sum_factor, Tolerance};
use crate::specfun::w_over_factorial;
use crate::spectral::{f4_closed_scaled, gamma_dephasing};
use crate::spectrum::{a_coeff, s_integral, SidebandSeriesA};

/// Discarded coefficient weight allowed when trimming a table.
const TABLE_TAIL: f64 = 1e-10;
/// Largest table truncation accepted by the series evaluation.
const TABLE_TOLERANCE: f64 = 1e-8;
/// Largest Fourier mode allowed outside the retained window.
const ALIASING_LIMIT: f64 = 1e-8;
const SCAN_POINTS: usize = 201;

/// Zero-temperature coefficient
/// `B_{n,m,p} = e^{-2 eta^2} eta^{2p} W_{n,p} W_{m,p} / (n! m! p!)`.
pub fn b_coeff_t0(n: u32, m: u32, p: u32, eta: f64) -> Result<f64> {
    if n > 100 || m > 100 || p > 100 {
        return Err(Error::domain(format!("B indices ({n}, {m}, {p}) exceed 100")));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::domain(format!("b_coeff_t0 needs eta > 0, got {eta}")));
    }
    let x = eta * eta;
    // W_{n,p} / n! = L_n^{(p-n)}(eta^2) keeps the n <-> m symmetry exact.
    let pref = (-2.0 * x + p as f64 * x.ln() - ln_factorial(p)).exp();
    Ok(pref * (w_over_factorial(n, p, x) * w_over_factorial(m, p, x)))
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| f64::from(k).ln()).sum()
}

/// Dense table of `B_{n,m,p}` over rectangular index ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct BCoeffTable {
    pub eta: f64,
    pub nbar: f64,
    /// Inclusive index ranges `(lo, hi)` for n, m and p.
    pub n_range: (i64, i64),
    pub m_range: (i64, i64),
    pub p_range: (i64, i64),
    values: Vec<f64>,
    /// Bound on the coefficient weight outside the table.
    pub truncation_error: f64,
}

impl BCoeffTable {
    fn dims(&self) -> (usize, usize, usize) {
        (
            span(self.n_range),
            span(self.m_range),
            span(self.p_range),
        )
    }

    fn index(&self, n: i64, m: i64, p: i64) -> Option<usize> {
        let inside = |v: i64, r: (i64, i64)| v >= r.0 && v <= r.1;
        if !(inside(n, self.n_range) && inside(m, self.m_range) && inside(p, self.p_range)) {
            return None;
        }
        let (_, dm, dp) = self.dims();
        let (i, j, k) = (
            (n - self.n_range.0) as usize,
            (m - self.m_range.0) as usize,
            (p - self.p_range.0) as usize,
        );
        Some((i * dm + j) * dp + k)
    }

    /// `B_{n,m,p}`, zero outside the table.
    pub fn get(&self, n: i64, m: i64, p: i64) -> f64 {
        self.index(n, m, p).map_or(0.0, |i| self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Iterates `(n, m, p, B)` over the stored entries.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, i64, f64)> + '_ {
        let (_, dm, dp) = self.dims();
        self.values.iter().enumerate().map(move |(idx, &b)| {
            let k = idx % dp;
            let j = (idx / dp) % dm;
            let i = idx / (dp * dm);
            (
                self.n_range.0 + i as i64,
                self.m_range.0 + j as i64,
                self.p_range.0 + k as i64,
                b,
            )
        })
    }

    /// Zero-temperature table from the closed form, trimmed so that the
    /// discarded weight stays below `1e-10`.
    pub fn closed_form(eta: f64) -> Result<Self> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::domain(format!("eta must be finite and >= 0, got {eta}")));
        }
        if eta == 0.0 {
            return Ok(BCoeffTable {
                eta,
                nbar: 0.0,
                n_range: (0, 0),
                m_range: (0, 0),
                p_range: (0, 0),
                values: vec![1.0],
                truncation_error: 0.0,
            });
        }
        let x = eta * eta;
        let nm_hi = poisson_reach(x) as i64;
        let p_hi = poisson_reach(4.0 * x) as i64;
        if nm_hi > 100 || p_hi > 100 {
            return Err(Error::domain(format!("closed-form table at eta = {eta} needs indices above 100")));
        }
        // Laguerre factors L_n^{(p-n)}(eta^2) for every (n, p).
        let lag: Vec<Vec<f64>> = (0..=nm_hi as u32)
            .map(|n| (0..=p_hi as u32).map(|p| w_over_factorial(n, p, x)).collect())
            .collect();
        let pois: Vec<f64> = (0..=p_hi as u32)
            .map(|p| (-2.0 * x + p as f64 * x.ln() - ln_factorial(p)).exp())
            .collect();
        let dn = nm_hi as usize + 1;
        let dp = p_hi as usize + 1;
        let mut values = vec![0.0; dn * dn * dp];
        for n in 0..dn {
            for m in 0..dn {
                for p in 0..dp {
                    values[(n * dn + m) * dp + p] = pois[p] * lag[n][p] * lag[m][p];
                }
            }
        }
        let full = BCoeffTable {
            eta,
            nbar: 0.0,
            n_range: (0, nm_hi),
            m_range: (0, nm_hi),
            p_range: (0, p_hi),
            values,
            truncation_error: 0.0,
        };
        let outside = (1.0 - full.sum()).abs();
        Ok(full.trimmed(TABLE_TAIL, outside))
    }

    /// Drops boundary slabs whose combined absolute weight is below `tail`;
    /// `outside` is the weight already missing from the full table.
    fn trimmed(self, tail: f64, outside: f64) -> Self {
        let (dn, dm, dp) = self.dims();
        let mut slab_n = vec![0.0; dn];
        let mut slab_m = vec![0.0; dm];
        let mut slab_p = vec![0.0; dp];
        for i in 0..dn {
            for j in 0..dm {
                for k in 0..dp {
                    let b = self.values[(i * dm + j) * dp + k].abs();
                    slab_n[i] += b;
                    slab_m[j] += b;
                    slab_p[k] += b;
                }
            }
        }
        let budget = tail / 6.0;
        let keep = |slabs: &[f64]| -> (usize, usize) {
            let mut lo = 0;
            let mut acc = 0.0;
            while lo + 1 < slabs.len() && acc + slabs[lo] < budget {
                acc += slabs[lo];
                lo += 1;
            }
            let mut hi = slabs.len() - 1;
            let mut acc = 0.0;
            while hi > lo && acc + slabs[hi] < budget {
                acc += slabs[hi];
                hi -= 1;
            }
            (lo, hi)
        };
        let (n0, n1) = keep(&slab_n);
        let (m0, m1) = keep(&slab_m);
        let (p0, p1) = keep(&slab_p);
        let mut values = Vec::with_capacity((n1 - n0 + 1) * (m1 - m0 + 1) * (p1 - p0 + 1));
        let mut dropped = 0.0;
        for i in 0..dn {
            for j in 0..dm {
                for k in 0..dp {
                    let b = self.values[(i * dm + j) * dp + k];
                    if (n0..=n1).contains(&i) && (m0..=m1).contains(&j) && (p0..=p1).contains(&k) {
                        values.push(b);
                    } else {
                        dropped += b.abs();
                    }
                }
            }
        }
        let shift = |r: (i64, i64), lo: usize, hi: usize| (r.0 + lo as i64, r.0 + hi as i64);
        BCoeffTable {
            n_range: shift(self.n_range, n0, n1),
            m_range: shift(self.m_range, m0, m1),
            p_range: shift(self.p_range, p0, p1),
            values,
            truncation_error: self.truncation_error + outside + dropped,
            ..self
        }
    }
}

fn span(r: (i64, i64)) -> usize {
    (r.1 - r.0 + 1) as usize
}

/// Index beyond which the Poisson tail of mean `mean` is negligible, with a
/// margin for the polynomial growth of the Laguerre factors.
fn poisson_reach(mean: f64) -> usize {
    let mut k = 0usize;
    let mut log_term = -mean;
    loop {
        if k as f64 > mean && log_term < -46.0 {
            return k + 4;
        }
        k += 1;
        log_term += mean.ln() - (k as f64).ln();
    }
}

/// Extracts `B_{n,m,p}` by a three-dimensional FFT of `e^{-F_4}` sampled over
/// one mechanical period per delay axis, at any thermal occupation.
///
/// `grid` is the number of samples per axis (a power of two, at least 64).
/// Only modes with `|k| < grid / 4` are kept; a discarded mode above `1e-8`,
/// or discarded modes totalling more than `1e-8`, signal aliasing and are
/// reported as [`Error::Resolution`].
pub fn b_table_numeric(eta: f64, nbar: f64, grid: usize) -> Result<BCoeffTable> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::domain(format!("eta must be finite and >= 0, got {eta}")));
    }
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::domain(format!("nbar must be finite and >= 0, got {nbar}")));
    }
    if grid < 64 || !grid.is_power_of_two() {
        return Err(Error::invalid("grid", format!("must be a power of two >= 64, got {grid}")));
    }
    let g = grid;
    let phase: Vec<Complex64> = (0..g)
        .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / g as f64))
        .collect();
    let eta2 = eta * eta;
    let thermal = 2.0 * nbar + 1.0;
    let one = Complex64::new(1.0, 0.0);
    let mut data = vec![Complex64::new(0.0, 0.0); g * g * g];
    for i1 in 0..g {
        let f2_1 = one - phase[i1].conj();
        for i2 in 0..g {
            let u = phase[i2];
            for i3 in 0..g {
                let v = phase[i3].conj();
                let f = f2_1 * (one + u) * (one + v) + (one - u * v);
                let exponent = Complex64::new(eta2 * thermal * f.re, eta2 * f.im);
                data[(i1 * g + i2) * g + i3] = (-exponent).exp();
            }
        }
    }
    fft3(&mut data, g);
    let norm = 1.0 / (g * g * g) as f64;
    let half = (g / 4) as i64;
    let wrap = |k: i64| k.rem_euclid(g as i64) as usize;

    let mut worst_discarded = 0.0f64;
    let mut discarded = 0.0;
    for i1 in 0..g {
        for i2 in 0..g {
            for i3 in 0..g {
                let centred = |i: usize| if i < g / 2 { i as i64 } else { i as i64 - g as i64 };
                let outside = [i1, i2, i3].iter().any(|&i| centred(i).abs() >= half);
                if outside {
                    let c = data[(i1 * g + i2) * g + i3].norm() * norm;
                    worst_discarded = worst_discarded.max(c);
                    discarded += c;
                }
            }
        }
    }
    if worst_discarded > ALIASING_LIMIT || discarded > TABLE_TOLERANCE {
        return Err(Error::Resolution(format!(
            "discarded Fourier modes reach {worst_discarded:e} (total {discarded:e}) at grid {g}"
        )));
    }
    let lo = -(half - 1);
    let hi = half - 1;
    let dn = span((lo, hi));
    let mut values = vec![0.0; dn * dn * dn];
    let mut worst_imag = 0.0f64;
    for n in lo..=hi {
        for m in lo..=hi {
            for p in lo..=hi {
                let c = data[(wrap(-p) * g + wrap(n)) * g + wrap(-m)] * norm;
                worst_imag = worst_imag.max(c.im.abs());
                let idx = (((n - lo) as usize) * dn + (m - lo) as usize) * dn + (p - lo) as usize;
                values[idx] = c.re;
            }
        }
    }
    if worst_imag > ALIASING_LIMIT {
        return Err(Error::Resolution(format!(
            "coefficients carry imaginary parts up to {worst_imag:e}"
        )));
    }
    let full = BCoeffTable {
        eta,
        nbar,
        n_range: (lo, hi),
        m_range: (lo, hi),
        p_range: (lo, hi),
        values,
        truncation_error: discarded,
    };
    Ok(full.trimmed(TABLE_TAIL, 0.0))
}

/// Numeric table at the smallest grid (64 or 128) that passes the aliasing check.
pub fn b_table_auto(eta: f64, nbar: f64) -> Result<BCoeffTable> {
    match b_table_numeric(eta, nbar, 64) {
        Err(Error::Resolution(_)) => b_table_numeric(eta, nbar, 128),
        other => other,
    }
}

fn fft3(data: &mut [Complex64], g: usize) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(g);
    // Contiguous axis.
    fft.process(data);
    let mut line = vec![Complex64::new(0.0, 0.0); g];
    // Middle axis.
    for i1 in 0..g {
        for i3 in 0..g {
            for i2 in 0..g {
                line[i2] = data[(i1 * g + i2) * g + i3];
            }
            fft.process(&mut line);
            for i2 in 0..g {
                data[(i1 * g + i2) * g + i3] = line[i2];
            }
        }
    }
    // Outer axis.
    for i2 in 0..g {
        for i3 in 0..g {
            for i1 in 0..g {
                line[i1] = data[(i1 * g + i2) * g + i3];
            }
            fft.process(&mut line);
            for i1 in 0..g {
                data[(i1 * g + i2) * g + i3] = line[i1];
            }
        }
    }
}

/// Evaluation route of a correlation value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum G2Method {
    Series,
    Quadrature,
    Approx,
}

impl fmt::Display for G2Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            G2Method::Series => "series",
            G2Method::Quadrature => "quadrature",
            G2Method::Approx => "approx",
        })
    }
}

/// `g2 = g2_raw / s_value^2`, with the discarded coefficient weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Result {
    pub g2: f64,
    pub g2_raw: f64,
    pub s_value: f64,
    pub method: G2Method,
    pub truncation_error: f64,
}

impl G2Result {
    fn new(g2_raw: f64, s_value: f64, method: G2Method, truncation_error: f64) -> Self {
        G2Result {
            g2: g2_raw / (s_value * s_value),
            g2_raw,
            s_value,
            method,
            truncation_error,
        }
    }
}

fn check_infinite_q(params: &SystemParams, what: &str) -> Result<()> {
    if params.q.is_finite() {
        return Err(Error::invalid(
            "Q",
            format!("{what} assumes an undamped mechanical mode; use the master-equation oracle at finite Q"),
        ));
    }
    Ok(())
}

/// Series `G2 = Re sum B / ((k + i(D - n w))(k - i(D - m w))) * 2k^3 / (2k - i(2D + 2D_g - p w))`
/// with `S` from the sideband series at uniform width `kappa`.
pub fn g2_series(
    delta0: f64,
    params: &SystemParams,
    table: &BCoeffTable,
    n_cut: Option<usize>,
) -> Result<G2Result> {
    params.validate()?;
    check_infinite_q(params, "the correlation series")?;
    let eta = params.eta();
    let nbar = params.nbar();
    if (table.eta - eta).abs() > 1e-12 * eta.max(1.0) || (table.nbar - nbar).abs() > 1e-9 * nbar.max(1.0) {
        return Err(Error::invalid(
            "table",
            format!(
                "built for eta = {}, nbar = {} but parameters give eta = {eta}, nbar = {nbar}",
                table.eta, table.nbar
            ),
        ));
    }
    if table.truncation_error > TABLE_TOLERANCE {
        return Err(Error::Truncation {
            error: table.truncation_error,
            tolerance: TABLE_TOLERANCE,
        });
    }
    let series = SidebandSeriesA::new(params, n_cut)?;
    Ok(g2_series_with(delta0, params, table, &series))
}

fn g2_series_with(delta0: f64, params: &SystemParams, table: &BCoeffTable, series: &SidebandSeriesA) -> G2Result {
    let w = params.omega_m;
    let k = params.kappa;
    let dg = params.delta_g();
    let delta = delta0 + dg;
    let u: Vec<Complex64> = (table.n_range.0..=table.n_range.1)
        .map(|n| Complex64::new(k, delta - n as f64 * w).inv())
        .collect();
    let v: Vec<Complex64> = (table.m_range.0..=table.m_range.1)
        .map(|m| Complex64::new(k, -(delta - m as f64 * w)).inv())
        .collect();
    let pair: Vec<Complex64> = (table.p_range.0..=table.p_range.1)
        .map(|p| 2.0 * k * k * k / Complex64::new(2.0 * k, -(2.0 * delta + 2.0 * dg - p as f64 * w)))
        .collect();
    let (_, dm, dp) = table.dims();
    let mut total = Complex64::new(0.0, 0.0);
    for (i, un) in u.iter().enumerate() {
        for (j, vm) in v.iter().enumerate() {
            let row = &table.values[(i * dm + j) * dp..(i * dm + j + 1) * dp];
            let inner: Complex64 = row.iter().zip(&pair).map(|(&b, &wp)| wp * b).sum();
            total += un * vm * inner;
        }
    }
    let s = series.evaluate(delta, w, k, Some(k));
    G2Result::new(total.re, s, G2Method::Series, table.truncation_error + series.truncation_error)
}

/// Coefficient table and sideband weights for one parameter set, reused
/// across detunings.
#[derive(Debug, Clone)]
pub struct SeriesEvaluator {
    params: SystemParams,
    table: BCoeffTable,
    series: SidebandSeriesA,
}

impl SeriesEvaluator {
    /// Closed-form table at zero temperature, FFT extraction otherwise.
    pub fn new(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        check_infinite_q(params, "the correlation series")?;
        let table = if params.nbar() == 0.0 {
            BCoeffTable::closed_form(params.eta())?
        } else {
            b_table_auto(params.eta(), params.nbar())?
        };
        if table.truncation_error > TABLE_TOLERANCE {
            return Err(Error::Truncation {
                error: table.truncation_error,
                tolerance: TABLE_TOLERANCE,
            });
        }
        let series = SidebandSeriesA::new(params, None)?;
        Ok(SeriesEvaluator {
            params: *params,
            table,
            series,
        })
    }

    pub fn table(&self) -> &BCoeffTable {
        &self.table
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn eval(&self, delta0: f64) -> G2Result {
        g2_series_with(delta0, &self.params, &self.table, &self.series)
    }
}

/// `g2` by direct quadrature of the triple delay integral, divided by the
/// quadrature spectrum.
///
/// The kernel is exactly `2 pi / omega_m` periodic in each delay, so each
/// half-line reduces to one period times `1 / (1 - e^{2 pi a_j})`.
pub fn g2_integral(delta0: f64, params: &SystemParams, spec: &QuadratureSpec) -> Result<G2Result> {
    params.validate()?;
    spec.validate()?;
    check_infinite_q(params, "the triple delay integral")?;
    let s = params.scaled();
    let k = s.kappa;
    let dg = s.delta_g();
    let delta = delta0 / params.omega_m + dg;
    let a1 = Complex64::new(-2.0 * k, 2.0 * (delta + dg));
    let a2 = Complex64::new(-k, -delta);
    let a3 = Complex64::new(-k, delta);
    let period = 2.0 * PI;
    let tol = Tolerance::new(1e-10, 1e-9);
    let panels = (delta.abs() + 2.0 * dg + 4.0 * s.eta * s.eta * (2.0 * s.nbar + 1.0) + 2.0).ceil() as usize;
    let budget = spec.max_subdivisions;
    let axis = |name: &str, e: Error| match e {
        Error::Convergence { context, estimate, error, subdivisions } => Error::Convergence {
            context: format!("{name} axis: {context}"),
            estimate,
            error,
            subdivisions,
        },
        other => other,
    };
    let cube = integrate(
        |t1| {
            let e1 = (a1 * t1).exp();
            let inner = integrate(
                |t2| {
                    let e2 = (a2 * t2).exp();
                    let innermost = integrate(
                        |t3| Ok((a3 * t3 - f4_closed_scaled(t1, t2, t3, &s)).exp()),
                        0.0,
                        period,
                        panels,
                        tol,
                        budget,
                    )
                    .map_err(|e| axis("tau3", e))?;
                    Ok(e2 * innermost.value)
                },
                0.0,
                period,
                panels,
                tol,
                budget,
            )
            .map_err(|e| axis("tau2", e))?;
            Ok(e1 * inner.value)
        },
        0.0,
        period,
        panels,
        tol,
        budget,
    )
    .map_err(|e| axis("tau1", e))?;
    let factor = periodic_sum_factor(a1, period) * periodic_sum_factor(a2, period) * periodic_sum_factor(a3, period);
    let g2_raw = 2.0 * k * k * k * (cube.value * factor).re;
    let s_value = s_integral(delta0, params, spec)?;
    Ok(G2Result::new(g2_raw, s_value, G2Method::Quadrature, cube.error))
}

/// Prefactors `C_0 = B_000 / A_0^2` and `C_1 = B_001 / (eta^2 A_0^2)` of the
/// two-Lorentzian approximation; both are one at zero temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxCoefficients {
    pub c0: f64,
    pub c1: f64,
}

impl ApproxCoefficients {
    pub fn new(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        let nbar = params.nbar();
        let eta = params.eta();
        if nbar == 0.0 || eta == 0.0 {
            return Ok(ApproxCoefficients { c0: 1.0, c1: 1.0 });
        }
        let table = b_table_auto(eta, nbar)?;
        let a0 = a_coeff(0, eta, nbar);
        Ok(ApproxCoefficients {
            c0: table.get(0, 0, 0) / (a0 * a0),
            c1: table.get(0, 0, 1) / (eta * eta * a0 * a0),
        })
    }

    /// `C0 (k^2+D^2)/(k^2+(D+D_g)^2) + eta^2 C1 (k^2+D^2)/(k^2+(D+D_g-w/2)^2)`.
    pub fn eval(&self, delta0: f64, params: &SystemParams) -> f64 {
        let k2 = params.kappa * params.kappa;
        let dg = params.delta_g();
        let d = delta0 + dg;
        let num = k2 + d * d;
        let first = self.c0 * num / (k2 + (d + dg).powi(2));
        let second = params.eta().powi(2) * self.c1 * num / (k2 + (d + dg - 0.5 * params.omega_m).powi(2));
        first + second
    }
}

/// Two-Lorentzian approximation of `g2` near the first anti-bunching tip.
pub fn g2_approx(delta0: f64, params: &SystemParams) -> Result<f64> {
    let c = ApproxCoefficients::new(params)?;
    if params.eta() >= 1.0 || params.kappa >= params.omega_m {
        log::warn!(
            "two-Lorentzian approximation used outside eta < 1, kappa < omega_m (eta = {}, kappa/omega_m = {})",
            params.eta(),
            params.kappa / params.omega_m
        );
    }
    Ok(c.eval(delta0, params))
}

/// How [`g2_min`] locates the minimum over the laser detuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum G2MinMode {
    /// Closed-form estimate: the strong-coupling expression at `Delta = 0` when
    /// `g0 > kappa`, else `1 - g0^2 / (omega_m kappa)` at `Delta = kappa`.
    Formula,
    /// Grid plus golden-section search of the series over
    /// `Delta0 in [-Delta_g - omega_m/2, -Delta_g + omega_m/2]`.
    Scan,
    /// As [`G2MinMode::Scan`] over `[-Delta_g - 3 omega_m, -Delta_g + 3 omega_m]`.
    ScanFullRange,
    /// As [`G2MinMode::Scan`] applied to the two-Lorentzian approximation.
    ApproxScan,
}

/// Location and value of the minimum of `g2` over the detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Minimum {
    pub delta0_opt: f64,
    pub g2_min: f64,
}

/// Strong-coupling estimate `(k/w)^2 [1/eta^4 + 4 eta^2 / ((k/w)^2 + (1 - 2 eta^2)^2)]`.
pub fn g2_min_strong_coupling(eta: f64, kappa_over_omega: f64) -> f64 {
    let k2 = kappa_over_omega * kappa_over_omega;
    let e2 = eta * eta;
    k2 * (1.0 / (e2 * e2) + 4.0 * e2 / (k2 + (1.0 - 2.0 * e2).powi(2)))
}

pub fn g2_min(params: &SystemParams, mode: G2MinMode) -> Result<G2Minimum> {
    params.validate()?;
    let dg = params.delta_g();
    let w = params.omega_m;
    match mode {
        G2MinMode::Formula => {
            if params.g0 > params.kappa {
                Ok(G2Minimum {
                    delta0_opt: -dg,
                    g2_min: g2_min_strong_coupling(params.eta(), params.kappa / w),
                })
            } else {
                Ok(G2Minimum {
                    delta0_opt: params.kappa - dg,
                    g2_min: 1.0 - params.g0 * params.g0 / (w * params.kappa),
                })
            }
        }
        G2MinMode::Scan | G2MinMode::ScanFullRange => {
            let half = if mode == G2MinMode::Scan { 0.5 * w } else { 3.0 * w };
            let evaluator = SeriesEvaluator::new(params)?;
            minimize(|d| Ok(evaluator.eval(d).g2), -dg - half, -dg + half, 1e-10 * w)
        }
        G2MinMode::ApproxScan => {
            let c = ApproxCoefficients::new(params)?;
            minimize(|d| Ok(c.eval(d, params)), -dg - 0.5 * w, -dg + 0.5 * w, 1e-10 * w)
        }
    }
}

/// Coarse grid followed by golden-section refinement around the best point.
fn minimize<F>(mut f: F, lo: f64, hi: f64, x_tol: f64) -> Result<G2Minimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..SCAN_POINTS {
        let v = f(lo + i as f64 * step)?;
        if !v.is_finite() {
            return Err(Error::Search(format!("non-finite g2 at Delta0 = {}", lo + i as f64 * step)));
        }
        if v < best.1 {
            best = (i, v);
        }
    }
    let centre = lo + best.0 as f64 * step;
    let mut a = (centre - step).max(lo);
    let mut b = (centre + step).min(hi);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut iterations = 0;
    while (b - a).abs() > x_tol {
        if iterations > 200 {
            return Err(Error::Search(format!("golden section did not converge on [{a}, {b}]")));
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d)?;
        }
        iterations += 1;
    }
    let (x, v) = if fc < fd { (c, fc) } else { (d, fd) };
    let (x, v) = if best.1 < v { (centre, best.1) } else { (x, v) };
    if !v.is_finite() {
        return Err(Error::Search("non-finite minimum".into()));
    }
    Ok(G2Minimum { delta0_opt: x, g2_min: v })
}

/// Bad-cavity estimate `e^{(Delta0 T_phi)^2} / (sqrt(4 pi) kappa T_phi)`.
pub fn g2_bad_cavity(delta0: f64, params: &SystemParams) -> Result<f64> {
    params.validate()?;
    if params.g0 == 0.0 {
        return Err(Error::invalid("g0", "bad-cavity estimate needs g0 > 0"));
    }
    if params.kappa < params.omega_m {
        log::warn!(
            "bad-cavity estimate used at kappa/omega_m = {}",
            params.kappa / params.omega_m
        );
    }
    let (_, t_phi_inv) = gamma_dephasing(params);
    let t_phi = 1.0 / t_phi_inv;
    let x = delta0 * t_phi;
    Ok((x * x).exp() / ((4.0 * PI).sqrt() * params.kappa * t_phi))
}
