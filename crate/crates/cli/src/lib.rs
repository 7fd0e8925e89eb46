//! Parameter sweeps over the blockade library, written as CSV.
//!
//! [`config::RunConfig`] holds a run as JSON, [`run::execute`] evaluates it
//! on a worker pool and [`run::Report`] renders the rows in input order.

use std::fmt;

pub mod config;
pub mod run;
pub mod units;

/// Bad input: flags, config file, or a parameter the library rejects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 2;
    pub const NUMERICAL: u8 = 3;
    pub const TRUNCATION: u8 = 4;
}
