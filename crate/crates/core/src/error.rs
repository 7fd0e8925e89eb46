use thiserror::Error;

/// Errors raised by the numerical kernels, series and oracle solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error(
        "{context}: no convergence (estimate {estimate:e}, error {error:e}, {subdivisions} subdivisions)"
    )]
    Convergence {
        context: String,
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("series truncation error {error:e} exceeds tolerance {tolerance:e}")]
    Truncation { error: f64, tolerance: f64 },

    #[error("Fock-space leakage {leakage:e} exceeds tolerance {tolerance:e}")]
    Leakage { leakage: f64, tolerance: f64 },

    #[error("steady-state solver failure: {0}")]
    Solver(String),

    #[error("Hilbert space of dimension {0} exceeds the supported size")]
    Size(usize),

    #[error("minimum search failed: {0}")]
    Search(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// True for failures caused by an insufficient numerical budget rather
    /// than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. }
                | Error::Resolution(_)
                | Error::Truncation { .. }
                | Error::Solver(_)
                | Error::Search(_)
                | Error::Overflow(_)
        )
    }
}
