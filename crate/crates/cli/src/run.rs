//! Row evaluation for each mode and CSV rendering.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use blockade_core::correlations::{g2_approx, g2_integral, g2_min, G2MinMode, SeriesEvaluator};
use blockade_core::oracle::weak_drive_extrapolation;
use blockade_core::spectrum::{s_bad_cavity, s_integral, s_series};
use blockade_core::{Error, SystemParams};
use rayon::prelude::*;

use crate::config::{Method, Mode, Resolved, SweepVar};
use crate::{exit, UsageError};

/// Mechanical quality factor the oracle uses when the run asks for `Q = inf`.
pub const ORACLE_DEFAULT_Q: f64 = 1e5;

/// How a failed cell affects the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Failure {
    Truncation,
    Numerical,
    Usage,
}

impl Failure {
    fn of(e: &Error) -> Self {
        match e {
            Error::Leakage { .. } | Error::Size(_) => Failure::Truncation,
            e if e.is_numerical() => Failure::Numerical,
            _ => Failure::Usage,
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Failure::Truncation => exit::TRUNCATION,
            Failure::Numerical => exit::NUMERICAL,
            Failure::Usage => exit::USAGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub values: Vec<f64>,
    pub errors: Vec<String>,
    pub failure: Option<Failure>,
}

impl Row {
    fn new(coords: Vec<f64>) -> Self {
        Row { values: coords, errors: Vec::new(), failure: None }
    }

    fn push(&mut self, column: &str, value: Result<f64, Error>) {
        match value {
            Ok(v) => self.values.push(v),
            Err(e) => self.fail(column, &e),
        }
    }

    fn fail(&mut self, column: &str, e: &Error) {
        self.values.push(f64::NAN);
        self.errors.push(format!("{column}: {e}"));
        self.failure = self.failure.max(Some(Failure::of(e)));
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub mode: Mode,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub summary: Vec<String>,
}

impl Report {
    /// Worst failure over all rows.
    pub fn failure(&self) -> Option<Failure> {
        self.rows.iter().filter_map(|r| r.failure).max()
    }

    pub fn exit_code(&self) -> u8 {
        self.failure().map_or(exit::OK, Failure::exit_code)
    }

    /// The CSV document. `config_json` is echoed into the header.
    pub fn to_csv(&self, config_json: &str, timestamp: bool) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# blockade-lab {}", env!("CARGO_PKG_VERSION"));
        if timestamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
            let _ = writeln!(s, "# generated at unix time {secs}");
        }
        let _ = writeln!(s, "# mode: {}", self.mode);
        let _ = writeln!(s, "# config: {config_json}");
        let _ = writeln!(s, "# frequencies in units of omega_m, T in K");
        let _ = writeln!(s, "{},error", self.columns.join(","));
        for row in &self.rows {
            for v in &row.values {
                // Drop the sign of negative zero.
                let v = if *v == 0.0 { 0.0 } else { *v };
                let _ = write!(s, "{v:.16e},");
            }
            let _ = writeln!(s, "\"{}\"", row.errors.join("; ").replace('"', "\"\""));
        }
        s
    }
}

fn coord_columns(r: &Resolved, with_delta0: bool) -> Vec<String> {
    let mut cols: Vec<String> = r.axes.iter().map(|a| a.var.column().to_string()).collect();
    if with_delta0 && !r.axes.iter().any(|a| a.var == SweepVar::Delta0) {
        cols.push(SweepVar::Delta0.column().to_string());
    }
    cols
}

fn coords(r: &Resolved, p: &SystemParams, with_delta0: bool) -> Vec<f64> {
    let w = p.omega_m;
    let value = |var: SweepVar| match var {
        SweepVar::Delta0 => p.detuning0 / w,
        SweepVar::G0 => p.g0 / w,
        SweepVar::Kappa => p.kappa / w,
        SweepVar::Temperature => p.temperature,
        SweepVar::Quality => p.q,
    };
    let mut out: Vec<f64> = r.axes.iter().map(|a| value(a.var)).collect();
    if with_delta0 && !r.axes.iter().any(|a| a.var == SweepVar::Delta0) {
        out.push(value(SweepVar::Delta0));
    }
    out
}

/// Evaluates every sweep point on a pool of `workers` threads (rayon's
/// default when unset). Rows come back in sweep order.
pub fn execute(r: &Resolved) -> Result<Report, UsageError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = r.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| UsageError(format!("workers: {e}")))?;
    let points = r.points();
    Ok(pool.install(|| match r.mode {
        Mode::Spectrum => spectrum(r, &points),
        Mode::G2 => g2(r, &points),
        Mode::G2Map => g2_map(r, &points),
        Mode::OracleCompare => oracle_compare(r, &points),
    }))
}

type Points = [(Vec<f64>, SystemParams)];

fn spectrum(r: &Resolved, points: &Points) -> Report {
    let (series, integral, bad) = match r.method {
        None => (true, true, false),
        Some(Method::Series) => (true, false, false),
        Some(Method::Integral) => (false, true, false),
        Some(Method::Approx) => (false, false, true),
        Some(Method::All) => (true, true, true),
    };
    let mut columns = coord_columns(r, true);
    for (on, name) in [(series, "S_series"), (integral, "S_integral"), (bad, "S_bad_cavity")] {
        if on {
            columns.push(name.into());
        }
    }
    let rows: Vec<Row> = points
        .par_iter()
        .map(|(_, p)| {
            let d = p.detuning0;
            let mut row = Row::new(coords(r, p, true));
            if series {
                row.push("S_series", s_series(d, p, None).map(|v| v.value));
            }
            if integral {
                row.push("S_integral", s_integral(d, p, &r.quadrature));
            }
            if bad {
                row.push("S_bad_cavity", s_bad_cavity(d, p));
            }
            row
        })
        .collect();
    let summary = column_summary(&columns, &rows, coord_columns(r, true).len());
    Report { mode: Mode::Spectrum, columns, rows, summary }
}

/// Correlation series and approximations assume an undamped mechanical mode.
fn weak_damping(p: &SystemParams) -> SystemParams {
    p.with_q(f64::INFINITY)
}

/// Key identifying everything but the detuning.
fn evaluator_key(p: &SystemParams) -> [u64; 4] {
    [p.g0.to_bits(), p.omega_m.to_bits(), p.kappa.to_bits(), p.temperature.to_bits()]
}

/// One series evaluator per distinct parameter set, built in parallel.
fn evaluators(points: &Points) -> (HashMap<[u64; 4], usize>, Vec<Result<SeriesEvaluator, Error>>) {
    let mut index = HashMap::new();
    let mut unique = Vec::new();
    for (_, p) in points {
        index.entry(evaluator_key(p)).or_insert_with(|| {
            unique.push(weak_damping(p));
            unique.len() - 1
        });
    }
    let built = unique.par_iter().map(SeriesEvaluator::new).collect();
    (index, built)
}

fn g2(r: &Resolved, points: &Points) -> Report {
    let (series, approx, integral) = match r.method {
        None => (true, true, false),
        Some(Method::Series) => (true, false, false),
        Some(Method::Approx) => (false, true, false),
        Some(Method::Integral) => (false, false, true),
        Some(Method::All) => (true, true, true),
    };
    let mut columns = coord_columns(r, true);
    for (on, name) in [(series, "g2_series"), (approx, "g2_approx"), (integral, "g2_integral")] {
        if on {
            columns.push(name.into());
        }
    }
    let (index, evals) = if series { evaluators(points) } else { (HashMap::new(), Vec::new()) };
    let rows: Vec<Row> = points
        .par_iter()
        .map(|(_, p)| {
            let d = p.detuning0;
            let ideal = weak_damping(p);
            let mut row = Row::new(coords(r, p, true));
            if series {
                match &evals[index[&evaluator_key(p)]] {
                    Ok(ev) => row.values.push(ev.eval(d).g2),
                    Err(e) => row.fail("g2_series", e),
                }
            }
            if approx {
                row.push("g2_approx", g2_approx(d, &ideal));
            }
            if integral {
                row.push("g2_integral", g2_integral(d, &ideal, &r.quadrature).map(|v| v.g2));
            }
            row
        })
        .collect();
    let summary = column_summary(&columns, &rows, coord_columns(r, true).len());
    Report { mode: Mode::G2, columns, rows, summary }
}

fn g2_map(r: &Resolved, points: &Points) -> Report {
    let mode = match (r.method, r.full_range) {
        (Some(Method::Approx), _) => G2MinMode::ApproxScan,
        (_, true) => G2MinMode::ScanFullRange,
        _ => G2MinMode::Scan,
    };
    let mut columns = coord_columns(r, false);
    columns.push("min_g2".into());
    columns.push("delta0_opt/omega_m".into());
    let rows: Vec<Row> = points
        .par_iter()
        .map(|(_, p)| {
            let mut row = Row::new(coords(r, p, false));
            match g2_min(&weak_damping(p), mode) {
                Ok(m) => row.values.extend([m.g2_min, m.delta0_opt / p.omega_m]),
                Err(e) => {
                    row.fail("min_g2", &e);
                    row.values.push(f64::NAN);
                }
            }
            row
        })
        .collect();
    let quantum = rows.iter().filter(|row| row.values[2] < 1.0).count();
    let mut summary = column_summary(&columns, &rows, 2);
    summary.push(format!("points with min_g2 < 1: {quantum} of {}", rows.len()));
    Report { mode: Mode::G2Map, columns, rows, summary }
}

const ORACLE_COLUMNS: [&str; 7] = ["S_analytic", "S_oracle", "S_rel_dev", "g2_analytic", "g2_oracle", "g2_rel_dev", "leakage"];

fn oracle_compare(r: &Resolved, points: &Points) -> Report {
    let mut columns = coord_columns(r, true);
    columns.extend(ORACLE_COLUMNS.iter().map(|c| c.to_string()));
    let rows: Vec<Row> = points
        .par_iter()
        .map(|(_, p)| {
            let d = p.detuning0;
            let mut row = Row::new(coords(r, p, true));
            let s = s_series(d, p, None).map(|v| v.value);
            let g2 = SeriesEvaluator::new(&weak_damping(p)).map(|ev| ev.eval(d).g2);
            let damped = if p.q.is_finite() { *p } else { p.with_q(ORACLE_DEFAULT_Q) };
            let oracle = weak_drive_extrapolation(&damped, &r.truncation_for(&damped), &r.drives_for(p));
            if let Ok(o) = &oracle {
                for w in &o.warnings {
                    log::warn!("delta0/omega_m = {}: {w}", d / p.omega_m);
                }
            }
            let rel = |a: &Result<f64, Error>, b: Option<f64>| match (a, b) {
                (Ok(a), Some(b)) => (b - a).abs() / a.abs(),
                _ => f64::NAN,
            };
            let (s_o, g2_o, leak) = match &oracle {
                Ok(o) => (Some(o.spectrum), Some(o.g2), o.max_leakage()),
                Err(Error::Leakage { leakage, .. }) => (None, None, *leakage),
                Err(_) => (None, None, f64::NAN),
            };
            let (s_dev, g2_dev) = (rel(&s, s_o), rel(&g2, g2_o));
            row.push("S_analytic", s);
            match &oracle {
                Ok(o) => row.values.push(o.spectrum),
                Err(e) => row.fail("oracle", e),
            }
            row.values.push(s_dev);
            row.push("g2_analytic", g2);
            row.values.push(g2_o.unwrap_or(f64::NAN));
            row.values.extend([g2_dev, leak]);
            row
        })
        .collect();

    let n = coord_columns(r, true).len();
    let ok: Vec<&Row> = rows.iter().filter(|row| row.failure.is_none()).collect();
    let max = |k: usize| ok.iter().map(|row| row.values[n + k]).fold(f64::NAN, f64::max);
    let truncated = rows.iter().filter(|row| row.failure == Some(Failure::Truncation)).count();
    let other = rows.iter().filter(|row| row.failure.is_some_and(|f| f != Failure::Truncation)).count();
    let summary = vec![
        format!("rows: {}, compared: {}, truncation failures: {truncated}, other failures: {other}", rows.len(), ok.len()),
        format!("max S relative deviation: {:.6e}", max(2)),
        format!("max g2 relative deviation: {:.6e}", max(5)),
        format!("max leakage: {:.6e}", max(6)),
    ];
    Report { mode: Mode::OracleCompare, columns, rows, summary }
}

/// Row count, failures, and the range of every value column.
fn column_summary(columns: &[String], rows: &[Row], n_coords: usize) -> Vec<String> {
    let failed = rows.iter().filter(|r| r.failure.is_some()).count();
    let mut out = vec![format!("rows: {}, failed: {failed}", rows.len())];
    for (k, name) in columns.iter().enumerate().skip(n_coords) {
        let finite = rows.iter().map(|r| r.values[k]).filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if lo <= hi {
            out.push(format!("{name}: min {lo:.6e}, max {hi:.6e}"));
        }
    }
    out
}
