//! Mechanical bath: Ohmic-resonance spectral density, Bose occupation, the
//! photon nonlinearity and the displacement-correlation kernels `F_2`, `F_4`.
//!
//! The kernels are
//!
//! ```text
//! F_k = (2/pi) int_0^inf dw J(w)/w^2 [ (N(w)+1) f_k + N(w) f_k^* ]
//!     = (2/pi) int_0^inf dw J(w)/w^2 [ (2N+1) Re f_k + i Im f_k ]
//! ```
//!
//! with `f_2 = 1 - e^{-i w tau}` and
//! `f_4 = 2 + e^{i w t2} + e^{-i w t3} - (1 + e^{i w t2}) e^{-i w t1} (1 + e^{-i w t3})`.
//! Frequencies are scaled by omega_m before integrating.

use std::f64::consts::{FRAC_2_PI, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{QuadratureSpec, Scaled, SystemParams, HBAR, K_B};
use crate::quad::{integrate, Tolerance};

/// Ohmic bath with a single mechanical resonance of quality factor `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDensity {
    omega_m: f64,
    q: f64,
    eta: f64,
}

impl SpectralDensity {
    /// Finite `q >= 1` only: the infinite-Q limit is a delta function and is
    /// handled by the closed-form kernels.
    pub fn new(omega_m: f64, q: f64, eta: f64) -> Result<Self> {
        if !(omega_m > 0.0 && omega_m.is_finite()) {
            return Err(Error::invalid("omega_m", "must be finite and > 0"));
        }
        if !(q >= 1.0 && q.is_finite()) {
            return Err(Error::invalid(
                "Q",
                format!("spectral density needs finite Q >= 1, got {q}"),
            ));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::invalid("eta", "must be finite and >= 0"));
        }
        Ok(SpectralDensity { omega_m, q, eta })
    }

    pub fn from_params(params: &SystemParams) -> Result<Self> {
        Self::new(params.omega_m, params.q, params.eta())
    }

    pub fn omega_m(&self) -> f64 {
        self.omega_m
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `J(w) / omega_m` as a function of `w / omega_m`.
    fn scaled(&self, w: f64) -> f64 {
        let d = w * w - 1.0;
        (w / self.q) * self.eta * self.eta / (d * d + w * w / (self.q * self.q))
    }

    /// Split points of the frequency axis around the resonance.
    fn breakpoints(&self, omega_max: f64) -> Vec<f64> {
        let lo = 1.0 - 3.0 / self.q;
        let hi = (1.0 + 3.0 / self.q).min(0.5 * (1.0 + omega_max));
        let mut pts = vec![0.0];
        if lo > 0.0 {
            pts.push(lo);
        }
        pts.push(hi);
        pts.push(omega_max);
        pts
    }
}

/// `J(omega)` in rad/s.
pub fn j_ohmic(omega: f64, sd: &SpectralDensity) -> Result<f64> {
    if !omega.is_finite() || omega < 0.0 {
        return Err(Error::domain(format!("J(omega) needs finite omega >= 0, got {omega}")));
    }
    Ok(sd.omega_m * sd.scaled(omega / sd.omega_m))
}

/// Bose-Einstein occupation `1 / (e^{hbar w / k_B T} - 1)`.
pub fn bose_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::domain(format!("bose_occupation needs omega > 0, got {omega}")));
    }
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(Error::domain(format!("temperature must be finite and >= 0, got {temperature}")));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (HBAR * omega / (K_B * temperature)).exp_m1())
}

/// `2N(w)+1 = coth(w / 2 theta)` with `theta = k_B T / (hbar omega_m)`.
fn thermal_factor(w: f64, theta: f64) -> f64 {
    if theta == 0.0 {
        1.0
    } else {
        1.0 / (0.5 * w / theta).tanh()
    }
}

fn frequency_tolerance(spec: &QuadratureSpec) -> Tolerance {
    Tolerance::new(spec.abs_tol, spec.rel_tol)
}

/// Photon nonlinearity `(2/pi) int_0^inf J(w)/w dw` in rad/s.
pub fn delta_g(sd: &SpectralDensity, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let tol = frequency_tolerance(spec);
    let pts = sd.breakpoints(spec.omega_max);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let est = integrate(
            |x| Ok(Complex64::new(sd.scaled(x) / x, 0.0)),
            w[0],
            w[1],
            1,
            tol,
            spec.max_subdivisions,
        )?;
        total += est.value.re;
    }
    // Tail beyond omega_max through w = 1/s.
    let tail = integrate(
        |s| {
            let w = 1.0 / s;
            Ok(Complex64::new(sd.scaled(w) / w / (s * s), 0.0))
        },
        0.0,
        1.0 / spec.omega_max,
        1,
        tol,
        spec.max_subdivisions,
    )?;
    total += tail.value.re;
    Ok(FRAC_2_PI * total * sd.omega_m)
}

/// `f_2(w, tau) = 1 - e^{-i w tau}`, cancellation-free for small `w tau`.
pub(crate) fn f2_shape(phase: f64) -> Complex64 {
    let s = (0.5 * phase).sin();
    Complex64::new(2.0 * s * s, phase.sin())
}

/// `f_4(w, t1, t2, t3)` written as `f_2(t1)(1+u)(1+v) + f_2(t3 - t2)`,
/// `u = e^{i w t2}`, `v = e^{-i w t3}`.
pub(crate) fn f4_shape(w: f64, t1: f64, t2: f64, t3: f64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let u = Complex64::from_polar(1.0, w * t2);
    let v = Complex64::from_polar(1.0, -w * t3);
    f2_shape(w * t1) * (one + u) * (one + v) + f2_shape(w * (t3 - t2))
}

fn thermal_kernel<F>(sd: &SpectralDensity, theta: f64, spec: &QuadratureSpec, max_phase_rate: f64, shape: F) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    spec.validate()?;
    let tol = frequency_tolerance(spec);
    let pts = sd.breakpoints(spec.omega_max);
    let mut total = Complex64::new(0.0, 0.0);
    for w in pts.windows(2) {
        // Roughly one panel per oscillation of the integrand.
        let panels = ((w[1] - w[0]) * max_phase_rate / (2.0 * PI)).ceil().max(1.0) as usize;
        let est = integrate(
            |x| {
                let f = shape(x);
                let weight = sd.scaled(x) / (x * x);
                Ok(Complex64::new(weight * thermal_factor(x, theta) * f.re, weight * f.im))
            },
            w[0],
            w[1],
            panels,
            tol,
            spec.max_subdivisions,
        )?;
        total += est.value;
    }
    Ok(total * FRAC_2_PI)
}

fn theta_of(sd: &SpectralDensity, temperature: f64) -> Result<f64> {
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(Error::domain(format!("temperature must be finite and >= 0, got {temperature}")));
    }
    Ok(K_B * temperature / (HBAR * sd.omega_m))
}

/// `F_2(tau)` by frequency quadrature; `tau` in seconds.
pub fn f2_kernel(tau: f64, sd: &SpectralDensity, temperature: f64, spec: &QuadratureSpec) -> Result<Complex64> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::domain(format!("f2_kernel needs finite tau >= 0, got {tau}")));
    }
    let theta = theta_of(sd, temperature)?;
    if tau == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let t = tau * sd.omega_m;
    thermal_kernel(sd, theta, spec, t, |w| f2_shape(w * t))
}

/// `F_4(t1, t2, t3)` by frequency quadrature; times in seconds.
pub fn f4_kernel(
    tau1: f64,
    tau2: f64,
    tau3: f64,
    sd: &SpectralDensity,
    temperature: f64,
    spec: &QuadratureSpec,
) -> Result<Complex64> {
    for t in [tau1, tau2, tau3] {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("f4_kernel needs finite times >= 0, got {t}")));
        }
    }
    let theta = theta_of(sd, temperature)?;
    let (t1, t2, t3) = (tau1 * sd.omega_m, tau2 * sd.omega_m, tau3 * sd.omega_m);
    if t1 == 0.0 && t2 == t3 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let rate = t1 + t2 + t3;
    thermal_kernel(sd, theta, spec, rate, |w| f4_shape(w, t1, t2, t3))
}

/// Mechanical dephasing rate Gamma and the bad-cavity dephasing rate
/// `1/T_phi = 2 g0 sqrt(N + 1/2)`, both in rad/s.
///
/// Gamma is `eta^2 (2N+1) gamma` for any `T > 0` and exactly zero at `T = 0`.
pub fn gamma_dephasing(params: &SystemParams) -> (f64, f64) {
    let s = params.scaled();
    let t_phi_inv = 2.0 * params.g0 * (s.nbar + 0.5).sqrt();
    (s.big_gamma * params.omega_m, t_phi_inv)
}

pub(crate) fn f2_highq_scaled(t: f64, s: &Scaled) -> Complex64 {
    let eta2 = s.eta * s.eta;
    let damp = (-0.5 * s.gamma * t).exp();
    let re = s.big_gamma * t + eta2 * (2.0 * s.nbar + 1.0) * (1.0 - t.cos() * damp);
    let im = eta2 * t.sin() * damp;
    Complex64::new(re, im)
}

/// High-Q closed form
/// `F_2 = Gamma tau + eta^2 (2N+1)(1 - cos(w_m tau) e^{-gamma tau/2}) + i eta^2 sin(w_m tau) e^{-gamma tau/2}`.
pub fn f2_highq(tau: f64, params: &SystemParams) -> Result<Complex64> {
    params.validate()?;
    if params.q < 10.0 {
        return Err(Error::invalid("Q", format!("high-Q form needs Q >= 10, got {}", params.q)));
    }
    if params.q < 100.0 {
        log::warn!("high-Q kernel used at Q = {}; accuracy degrades below Q = 100", params.q);
    }
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::domain(format!("f2_highq needs finite tau >= 0, got {tau}")));
    }
    Ok(f2_highq_scaled(tau * params.omega_m, &params.scaled()))
}

pub(crate) fn f4_closed_scaled(t1: f64, t2: f64, t3: f64, s: &Scaled) -> Complex64 {
    let f = f4_shape(1.0, t1, t2, t3);
    let eta2 = s.eta * s.eta;
    Complex64::new(eta2 * (2.0 * s.nbar + 1.0) * f.re, eta2 * f.im)
}

/// Infinite-Q limit `F_4 = eta^2 [(2N+1) Re f_4(w_m) + i Im f_4(w_m)]`; the
/// mechanical damping in `params` is ignored. Times in seconds.
pub fn f4_closed_form(tau1: f64, tau2: f64, tau3: f64, params: &SystemParams) -> Complex64 {
    let w = params.omega_m;
    f4_closed_scaled(tau1 * w, tau2 * w, tau3 * w, &params.scaled())
}
