//! Physical parameter bundle and numerical controls.
//!
//! All frequencies are angular frequencies in rad/s and temperatures are in
//! kelvin. Internally every kernel works in units where the mechanical
//! frequency is one; [`SystemParams::scaled`] performs that conversion.

use crate::error::{Error, Result};

/// Reduced Planck constant in J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant in J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Driven single-mode optomechanical system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Single-photon coupling g0.
    pub g0: f64,
    /// Mechanical frequency.
    pub omega_m: f64,
    /// Cavity field decay rate (the field amplitude decays as e^{-kappa t}).
    pub kappa: f64,
    /// Mechanical quality factor, `f64::INFINITY` allowed.
    pub q: f64,
    /// Support temperature in kelvin.
    pub temperature: f64,
    /// Drive amplitude.
    pub drive: f64,
    /// Bare laser detuning omega_L - omega_c.
    pub detuning0: f64,
}

impl SystemParams {
    /// Undriven, zero-temperature system with infinite Q.
    pub fn new(g0: f64, omega_m: f64, kappa: f64) -> Self {
        SystemParams {
            g0,
            omega_m,
            kappa,
            q: f64::INFINITY,
            temperature: 0.0,
            drive: 0.0,
            detuning0: 0.0,
        }
    }

    /// Parameters in units of the mechanical frequency (omega_m = 1 rad/s).
    pub fn dimensionless(eta: f64, kappa: f64) -> Self {
        Self::new(eta, 1.0, kappa)
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    pub fn with_temperature(mut self, kelvin: f64) -> Self {
        self.temperature = kelvin;
        self
    }

    /// Sets the temperature so that the mechanical mode holds `nbar` thermal
    /// phonons on average.
    pub fn with_nbar(mut self, nbar: f64) -> Self {
        self.temperature = if nbar <= 0.0 {
            0.0
        } else {
            HBAR * self.omega_m / (K_B * (1.0 + 1.0 / nbar).ln())
        };
        self
    }

    pub fn with_drive(mut self, drive: f64) -> Self {
        self.drive = drive;
        self
    }

    pub fn with_detuning(mut self, detuning0: f64) -> Self {
        self.detuning0 = detuning0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, field: &'static str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("must be finite and > 0, got {v}")))
            }
        };
        if !(self.g0.is_finite() && self.g0 >= 0.0) {
            return Err(Error::invalid("g0", format!("must be finite and >= 0, got {}", self.g0)));
        }
        positive(self.omega_m, "omega_m")?;
        positive(self.kappa, "kappa")?;
        if !(self.q >= 1.0) {
            return Err(Error::invalid("Q", format!("must be >= 1 or infinite, got {}", self.q)));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::invalid("T", format!("must be finite and >= 0, got {}", self.temperature)));
        }
        if !(self.drive.is_finite() && self.drive >= 0.0) {
            return Err(Error::invalid("drive", format!("must be finite and >= 0, got {}", self.drive)));
        }
        if !self.detuning0.is_finite() {
            return Err(Error::invalid("detuning0", "must be finite"));
        }
        Ok(())
    }

    /// eta = g0 / omega_m.
    pub fn eta(&self) -> f64 {
        self.g0 / self.omega_m
    }

    /// Photon nonlinearity of the single-mode model, g0^2 / omega_m.
    pub fn delta_g(&self) -> f64 {
        self.g0 * self.g0 / self.omega_m
    }

    /// Mechanical damping rate omega_m / Q (zero for infinite Q).
    pub fn gamma(&self) -> f64 {
        if self.q.is_infinite() {
            0.0
        } else {
            self.omega_m / self.q
        }
    }

    /// Thermal occupation of the mechanical mode.
    pub fn nbar(&self) -> f64 {
        if self.temperature == 0.0 {
            0.0
        } else {
            1.0 / (HBAR * self.omega_m / (K_B * self.temperature)).exp_m1()
        }
    }

    /// Shifted detuning Delta = Delta0 + Delta_g.
    pub fn shifted_detuning(&self, detuning0: f64) -> f64 {
        detuning0 + self.delta_g()
    }

    pub(crate) fn scaled(&self) -> Scaled {
        let w = self.omega_m;
        let nbar = self.nbar();
        let gamma = if self.q.is_infinite() { 0.0 } else { 1.0 / self.q };
        let eta = self.eta();
        Scaled {
            eta,
            kappa: self.kappa / w,
            gamma,
            nbar,
            big_gamma: if self.temperature > 0.0 {
                eta * eta * (2.0 * nbar + 1.0) * gamma
            } else {
                0.0
            },
        }
    }
}

/// Parameters in units of omega_m.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Scaled {
    pub eta: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub nbar: f64,
    pub big_gamma: f64,
}

impl Scaled {
    pub fn delta_g(&self) -> f64 {
        self.eta * self.eta
    }
}

/// Tolerances and cutoffs for the oscillatory integrals.
///
/// `omega_max` is in units of omega_m and `tau_max` in units of 1/omega_m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub omega_max: f64,
    pub tau_max: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            omega_max: 40.0,
            tau_max: 1e6,
            max_subdivisions: 4000,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::invalid("rel_tol/abs_tol", "tolerances must be > 0"));
        }
        if !(self.omega_max > 1.0 && self.tau_max > 0.0) {
            return Err(Error::invalid(
                "omega_max/tau_max",
                "cutoffs must be positive and omega_max above the mechanical resonance",
            ));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::invalid("max_subdivisions", "must be >= 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities() {
        let p = SystemParams::new(0.5, 2.0, 0.1).with_q(200.0);
        assert_eq!(p.eta(), 0.25);
        assert_eq!(p.delta_g(), 0.125);
        assert_eq!(p.gamma(), 0.01);
        assert_eq!(p.nbar(), 0.0);
        assert_eq!(SystemParams::new(0.5, 2.0, 0.1).gamma(), 0.0);
    }

    #[test]
    fn nbar_round_trip() {
        for nbar in [0.1, 0.5, 1.0, 5.0, 100.0] {
            let p = SystemParams::new(0.1, 2.0e6, 1e5).with_nbar(nbar);
            assert!((p.nbar() - nbar).abs() < 1e-10 * nbar);
        }
    }

    #[test]
    fn validation_rejects_bad_fields() {
        assert!(SystemParams::new(-0.1, 1.0, 1.0).validate().is_err());
        assert!(SystemParams::new(0.0, 1.0, 1.0).validate().is_ok());
        assert!(SystemParams::new(0.1, 1.0, -1.0).validate().is_err());
        assert!(SystemParams::new(0.1, 1.0, 1.0).with_q(0.5).validate().is_err());
        assert!(SystemParams::new(0.1, 1.0, 1.0).with_temperature(-1.0).validate().is_err());
        assert!(SystemParams::new(0.1, 1.0, 1.0).validate().is_ok());
    }
}
