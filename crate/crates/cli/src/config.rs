//! Run configuration: a JSON document, overridden field by field by flags,
//! then resolved into library parameters and sweep grids.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use blockade_core::oracle::TruncationSpec;
use blockade_core::{QuadratureSpec, SystemParams};
use serde::{Deserialize, Serialize};

use crate::units::{frequency, quality, temperature, Quantity};
use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Spectrum,
    G2,
    G2Map,
    OracleCompare,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Spectrum => "spectrum",
            Mode::G2 => "g2",
            Mode::G2Map => "g2-map",
            Mode::OracleCompare => "oracle-compare",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Series,
    Integral,
    Approx,
    All,
}

impl FromStr for Method {
    type Err = UsageError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "series" => Ok(Method::Series),
            "integral" => Ok(Method::Integral),
            "approx" => Ok(Method::Approx),
            "all" => Ok(Method::All),
            other => Err(UsageError(format!("method: expected series|integral|approx|all, got '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    #[serde(rename = "delta0")]
    Delta0,
    #[serde(rename = "g0")]
    G0,
    #[serde(rename = "kappa")]
    Kappa,
    #[serde(rename = "T")]
    Temperature,
    #[serde(rename = "Q")]
    Quality,
}

impl SweepVar {
    fn parse(s: &str) -> Result<Self, UsageError> {
        match s {
            "delta0" => Ok(SweepVar::Delta0),
            "g0" => Ok(SweepVar::G0),
            "kappa" => Ok(SweepVar::Kappa),
            "T" => Ok(SweepVar::Temperature),
            "Q" => Ok(SweepVar::Quality),
            other => Err(UsageError(format!(
                "sweep: variable must be one of delta0, g0, kappa, T, Q; got '{other}'"
            ))),
        }
    }

    /// CSV column name in output units.
    pub fn column(&self) -> &'static str {
        match self {
            SweepVar::Delta0 => "delta0/omega_m",
            SweepVar::G0 => "g0/omega_m",
            SweepVar::Kappa => "kappa/omega_m",
            SweepVar::Temperature => "T/K",
            SweepVar::Quality => "Q",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

/// One sweep axis; on the command line `var:start:stop:points[:log]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub var: SweepVar,
    pub start: Quantity,
    pub stop: Quantity,
    pub points: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl FromStr for SweepAxis {
    type Err = UsageError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(4..=5).contains(&parts.len()) {
            return Err(UsageError(format!("sweep: expected var:start:stop:points[:log], got '{s}'")));
        }
        let points = parts[3]
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("sweep: points must be an integer, got '{}'", parts[3])))?;
        let scale = match parts.get(4).map(|p| p.trim()) {
            None | Some("linear") | Some("lin") => Scale::Linear,
            Some("log") => Scale::Log,
            Some(other) => return Err(UsageError(format!("sweep: scale must be linear or log, got '{other}'"))),
        };
        Ok(SweepAxis {
            var: SweepVar::parse(parts[0].trim())?,
            start: parts[1].into(),
            stop: parts[2].into(),
            points,
            scale,
        })
    }
}

/// Sweep given either as the command-line string or as an object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum SweepEntry {
    Text(String),
    Axis(SweepAxis),
}

fn sweeps_de<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<SweepAxis>, D::Error> {
    let entries = Vec::<SweepEntry>::deserialize(d)?;
    entries
        .into_iter()
        .map(|e| match e {
            SweepEntry::Axis(a) => Ok(a),
            SweepEntry::Text(s) => s.parse().map_err(serde::de::Error::custom),
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_subdivisions: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_photon_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_phonon_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leakage_tol: Option<f64>,
}

/// Everything a run needs; every command-line flag has a field here.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g0: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_m: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Quantity>,
    #[serde(rename = "Q", skip_serializing_if = "Option::is_none")]
    pub q: Option<Quantity>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub temperature: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta0: Option<Quantity>,
    #[serde(default, deserialize_with = "sweeps_de", skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepAxis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    /// Minimum search over the full detuning range instead of the first tip.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_range: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub no_timestamp: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureOverrides>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationOverrides>,
    /// Drive amplitudes for the oracle extrapolation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drives: Option<Vec<Quantity>>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, UsageError> {
        serde_json::from_str(text).map_err(|e| UsageError(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Fields set in `other` replace those in `self`; sweeps are replaced
    /// as a whole when `other` has any.
    pub fn merge(mut self, other: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(mode, g0, omega_m, kappa, q, temperature, drive, delta0, method, full_range, out, no_timestamp, workers, quadrature, truncation, drives);
        if !other.sweep.is_empty() {
            self.sweep = other.sweep;
        }
        self
    }
}

/// A sweep axis with its grid resolved to library units.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

/// Configuration turned into library inputs.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub mode: Mode,
    pub base: SystemParams,
    /// Fixed laser detuning; when absent each point sits at `-Delta_g`.
    pub delta0: Option<f64>,
    pub axes: Vec<Axis>,
    pub method: Option<Method>,
    pub full_range: bool,
    pub quadrature: QuadratureSpec,
    pub truncation: TruncationOverrides,
    /// Absolute drive amplitudes (rad/s); empty means `0.01 kappa, 0.02 kappa`.
    pub drives: Vec<f64>,
    pub out: Option<PathBuf>,
    pub no_timestamp: bool,
    pub workers: Option<usize>,
}

fn grid(axis: &SweepAxis, start: f64, stop: f64) -> Result<Vec<f64>, UsageError> {
    if axis.points < 2 {
        return Err(UsageError(format!("sweep {}: needs at least 2 points", axis.var.column())));
    }
    let n = axis.points;
    let t = |i: usize| i as f64 / (n - 1) as f64;
    match axis.scale {
        Scale::Linear => Ok((0..n).map(|i| start + (stop - start) * t(i)).collect()),
        Scale::Log => {
            if !(start > 0.0 && stop > 0.0) {
                return Err(UsageError(format!(
                    "sweep {}: log scale needs positive endpoints",
                    axis.var.column()
                )));
            }
            let (a, b) = (start.ln(), stop.ln());
            Ok((0..n).map(|i| (a + (b - a) * t(i)).exp()).collect())
        }
    }
}

impl RunConfig {
    pub fn resolve(&self) -> Result<Resolved, UsageError> {
        let mode = self.mode.ok_or_else(|| UsageError("mode: no subcommand given".into()))?;
        let omega_m = match &self.omega_m {
            Some(q) => frequency("omega_m", q, None)?,
            None => 1.0,
        };
        let w = Some(omega_m);
        let req = |field: &str, q: &Option<Quantity>| -> Result<f64, UsageError> {
            match q {
                Some(q) => frequency(field, q, w),
                None => Err(UsageError(format!("{field}: required"))),
            }
        };
        let swept = |v: SweepVar| self.sweep.iter().any(|a| a.var == v);
        let g0 = if swept(SweepVar::G0) && self.g0.is_none() { 0.0 } else { req("g0", &self.g0)? };
        let kappa = if swept(SweepVar::Kappa) && self.kappa.is_none() { 1.0 } else { req("kappa", &self.kappa)? };
        let mut base = SystemParams::new(g0, omega_m, kappa);
        if let Some(q) = &self.q {
            base = base.with_q(quality("Q", q)?);
        }
        if let Some(t) = &self.temperature {
            base = base.with_temperature(temperature("T", t, omega_m)?);
        }
        if let Some(d) = &self.drive {
            base = base.with_drive(frequency("drive", d, w)?);
        }
        let delta0 = match &self.delta0 {
            Some(d) => Some(frequency("delta0", d, w)?),
            None => None,
        };
        base = base.with_detuning(delta0.unwrap_or(0.0));
        base.validate().map_err(|e| UsageError(e.to_string()))?;

        let mut axes = Vec::with_capacity(self.sweep.len());
        for axis in &self.sweep {
            if axes.iter().any(|a: &Axis| a.var == axis.var) {
                return Err(UsageError(format!("sweep {}: given twice", axis.var.column())));
            }
            let value = |q: &Quantity| match axis.var {
                SweepVar::Delta0 => frequency("sweep delta0", q, w),
                SweepVar::G0 => frequency("sweep g0", q, w),
                SweepVar::Kappa => frequency("sweep kappa", q, w),
                SweepVar::Temperature => temperature("sweep T", q, omega_m),
                SweepVar::Quality => quality("sweep Q", q),
            };
            let values = grid(axis, value(&axis.start)?, value(&axis.stop)?)?;
            axes.push(Axis { var: axis.var, values });
        }
        match mode {
            Mode::G2Map => {
                let vars: Vec<SweepVar> = axes.iter().map(|a| a.var).collect();
                if vars.len() != 2 || !vars.contains(&SweepVar::G0) || !vars.contains(&SweepVar::Kappa) {
                    return Err(UsageError("sweep: g2-map needs exactly the two axes g0 and kappa".into()));
                }
            }
            _ => {}
        }

        let mut quadrature = QuadratureSpec::default();
        if let Some(o) = &self.quadrature {
            quadrature.rel_tol = o.rel_tol.unwrap_or(quadrature.rel_tol);
            quadrature.abs_tol = o.abs_tol.unwrap_or(quadrature.abs_tol);
            quadrature.omega_max = o.omega_max.unwrap_or(quadrature.omega_max);
            quadrature.tau_max = o.tau_max.unwrap_or(quadrature.tau_max);
            quadrature.max_subdivisions = o.max_subdivisions.unwrap_or(quadrature.max_subdivisions);
        }
        quadrature.validate().map_err(|e| UsageError(format!("quadrature: {e}")))?;

        let drives = match (&self.drives, &self.drive) {
            (Some(list), _) => list
                .iter()
                .map(|q| frequency("drives", q, w))
                .collect::<Result<Vec<_>, _>>()?,
            (None, Some(_)) => vec![base.drive, 2.0 * base.drive],
            (None, None) => Vec::new(),
        };
        if self.workers == Some(0) {
            return Err(UsageError("workers: must be >= 1".into()));
        }

        Ok(Resolved {
            mode,
            base,
            delta0,
            axes,
            method: self.method,
            full_range: self.full_range.unwrap_or(false),
            quadrature,
            truncation: self.truncation.clone().unwrap_or_default(),
            drives,
            out: self.out.clone(),
            no_timestamp: self.no_timestamp.unwrap_or(false),
            workers: self.workers,
        })
    }
}

impl Resolved {
    /// Truncation for one parameter point: defaults sized to the coupling,
    /// then the configured overrides.
    pub fn truncation_for(&self, params: &SystemParams) -> TruncationSpec {
        let mut t = TruncationSpec::for_params(params);
        if let Some(n) = self.truncation.n_photon_max {
            t.n_photon_max = n;
        }
        if let Some(n) = self.truncation.n_phonon_max {
            t.n_phonon_max = n;
        }
        if let Some(l) = self.truncation.leakage_tol {
            t.leakage_tol = l;
        }
        t
    }

    /// Drive amplitudes for the oracle at one parameter point.
    pub fn drives_for(&self, params: &SystemParams) -> Vec<f64> {
        if self.drives.is_empty() {
            vec![0.01 * params.kappa, 0.02 * params.kappa]
        } else {
            self.drives.clone()
        }
    }

    /// Parameter points in row order: the first axis varies slowest.
    pub fn points(&self) -> Vec<(Vec<f64>, SystemParams)> {
        let mut out = vec![(Vec::new(), self.base)];
        for axis in &self.axes {
            let mut next = Vec::with_capacity(out.len() * axis.values.len());
            for (coords, p) in &out {
                for &v in &axis.values {
                    let mut c = coords.clone();
                    c.push(v);
                    next.push((c, apply(*p, axis.var, v)));
                }
            }
            out = next;
        }
        if self.delta0.is_none() && !self.axes.iter().any(|a| a.var == SweepVar::Delta0) {
            for (_, p) in &mut out {
                *p = p.with_detuning(-p.delta_g());
            }
        }
        out
    }
}

fn apply(p: SystemParams, var: SweepVar, v: f64) -> SystemParams {
    match var {
        SweepVar::Delta0 => p.with_detuning(v),
        SweepVar::G0 => SystemParams { g0: v, ..p },
        SweepVar::Kappa => SystemParams { kappa: v, ..p },
        SweepVar::Temperature => p.with_temperature(v),
        SweepVar::Quality => p.with_q(v),
    }
}
