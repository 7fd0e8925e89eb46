//! Photon blockade in single-photon strong-coupling optomechanics.
//!
//! Three independent routes to the weak-drive excitation spectrum `S` and the
//! equal-time correlation `g2(0)` of a cavity coupled to one mechanical mode:
//!
//! * sideband series in Huang-Rhys weights ([`spectrum::s_series`],
//!   [`correlations::g2_series`]),
//! * direct quadrature of the displacement-correlation integrals
//!   ([`spectrum::s_integral`], [`correlations::g2_integral`]),
//! * a truncated Fock-space Lindblad master equation ([`oracle`]).
//!
//! Public functions take frequencies in rad/s and temperatures in kelvin.
//! The cavity rate `kappa` is the field decay rate; photon number decays at
//! `2 kappa`.

pub mod correlations;
pub mod error;
pub mod oracle;
pub mod params;
pub mod quad;
pub mod specfun;
pub mod spectral;
pub mod spectrum;

pub use error::{Error, Result};
pub use params::{QuadratureSpec, SystemParams};
