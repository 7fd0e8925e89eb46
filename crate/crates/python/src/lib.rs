//! Python module `blockade`.

use blockade_core::correlations::{self, G2MinMode};
use blockade_core::oracle::{self, SteadyStateMethod, SteadyStateResult, TruncationSpec};
use blockade_core::{specfun, spectral, spectrum, Error, QuadratureSpec};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(blockade, NumericalError, PyException, "The computation did not converge.");
create_exception!(blockade, TruncationError, PyException, "The truncated Fock space leaks probability.");

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Leakage { .. } | Error::Size(_) => TruncationError::new_err(e.to_string()),
        e if e.is_numerical() => NumericalError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

/// Cavity, mechanics and drive. Frequencies in rad/s, temperature in K.
#[pyclass(name = "SystemParams", module = "blockade", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PySystemParams(blockade_core::SystemParams);

#[pymethods]
impl PySystemParams {
    #[new]
    #[pyo3(signature = (g0, omega_m, kappa, q=f64::INFINITY, temperature=0.0, drive=0.0, detuning0=0.0))]
    fn new(g0: f64, omega_m: f64, kappa: f64, q: f64, temperature: f64, drive: f64, detuning0: f64) -> PyResult<Self> {
        let p = blockade_core::SystemParams::new(g0, omega_m, kappa)
            .with_q(q)
            .with_temperature(temperature)
            .with_drive(drive)
            .with_detuning(detuning0);
        p.validate().map_err(to_py)?;
        Ok(PySystemParams(p))
    }

    /// Parameters in units of omega_m: `g0 = eta`, `omega_m = 1`.
    #[staticmethod]
    fn dimensionless(eta: f64, kappa: f64) -> PyResult<Self> {
        Self::new(eta, 1.0, kappa, f64::INFINITY, 0.0, 0.0, 0.0)
    }

    fn with_q(&self, q: f64) -> Self {
        PySystemParams(self.0.with_q(q))
    }

    fn with_temperature(&self, kelvin: f64) -> Self {
        PySystemParams(self.0.with_temperature(kelvin))
    }

    fn with_nbar(&self, nbar: f64) -> Self {
        PySystemParams(self.0.with_nbar(nbar))
    }

    fn with_drive(&self, drive: f64) -> Self {
        PySystemParams(self.0.with_drive(drive))
    }

    fn with_detuning(&self, detuning0: f64) -> Self {
        PySystemParams(self.0.with_detuning(detuning0))
    }

    #[getter]
    fn g0(&self) -> f64 {
        self.0.g0
    }
    #[getter]
    fn omega_m(&self) -> f64 {
        self.0.omega_m
    }
    #[getter]
    fn kappa(&self) -> f64 {
        self.0.kappa
    }
    #[getter]
    fn q(&self) -> f64 {
        self.0.q
    }
    #[getter]
    fn temperature(&self) -> f64 {
        self.0.temperature
    }
    #[getter]
    fn drive(&self) -> f64 {
        self.0.drive
    }
    #[getter]
    fn detuning0(&self) -> f64 {
        self.0.detuning0
    }

    fn eta(&self) -> f64 {
        self.0.eta()
    }

    fn delta_g(&self) -> f64 {
        self.0.delta_g()
    }

    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    fn nbar(&self) -> f64 {
        self.0.nbar()
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!(
            "SystemParams(g0={}, omega_m={}, kappa={}, q={}, temperature={}, drive={}, detuning0={})",
            p.g0, p.omega_m, p.kappa, p.q, p.temperature, p.drive, p.detuning0
        )
    }
}

/// Correlation series with its coefficient table built once.
#[pyclass(name = "SeriesEvaluator", module = "blockade", frozen)]
struct PySeriesEvaluator(correlations::SeriesEvaluator);

#[pymethods]
impl PySeriesEvaluator {
    #[new]
    fn new(params: PySystemParams) -> PyResult<Self> {
        correlations::SeriesEvaluator::new(&params.0).map(PySeriesEvaluator).map_err(to_py)
    }

    fn g2(&self, delta0: f64) -> f64 {
        self.0.eval(delta0).g2
    }

    fn g2_many(&self, py: Python<'_>, delta0: Vec<f64>) -> Vec<f64> {
        py.detach(|| delta0.iter().map(|&d| self.0.eval(d).g2).collect())
    }
}

fn quadrature(rel_tol: Option<f64>) -> QuadratureSpec {
    let mut spec = QuadratureSpec::default();
    if let Some(t) = rel_tol {
        spec.rel_tol = t;
    }
    spec
}

#[pyfunction]
fn bessel_i(n: i64, x: f64) -> PyResult<f64> {
    specfun::bessel_i(n, x).map_err(to_py)
}

#[pyfunction]
fn laguerre_assoc(n: u32, alpha: f64, x: f64) -> PyResult<f64> {
    specfun::laguerre_assoc(n, alpha, x).map_err(to_py)
}

#[pyfunction]
fn w_coeff(n: u32, p: u32, eta: f64) -> PyResult<f64> {
    specfun::w_coeff(n, p, eta).map_err(to_py)
}

/// Returns `(Gamma, 1/T_phi)`.
#[pyfunction]
fn gamma_dephasing(params: PySystemParams) -> (f64, f64) {
    spectral::gamma_dephasing(&params.0)
}

#[pyfunction]
fn a_coeff(n: i64, eta: f64, nbar: f64) -> f64 {
    spectrum::a_coeff(n, eta, nbar)
}

/// Normalized spectrum from the sideband series.
#[pyfunction]
fn s_series(py: Python<'_>, delta0: f64, params: PySystemParams) -> PyResult<f64> {
    py.detach(|| spectrum::s_series(delta0, &params.0, None).map(|v| v.value)).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (delta0, params, rel_tol=None))]
fn s_integral(py: Python<'_>, delta0: f64, params: PySystemParams, rel_tol: Option<f64>) -> PyResult<f64> {
    py.detach(|| spectrum::s_integral(delta0, &params.0, &quadrature(rel_tol))).map_err(to_py)
}

#[pyfunction]
fn s_bad_cavity(delta0: f64, params: PySystemParams) -> PyResult<f64> {
    spectrum::s_bad_cavity(delta0, &params.0).map_err(to_py)
}

#[pyfunction]
fn b_coeff_t0(n: u32, m: u32, p: u32, eta: f64) -> PyResult<f64> {
    correlations::b_coeff_t0(n, m, p, eta).map_err(to_py)
}

#[pyfunction]
fn g2_series(py: Python<'_>, delta0: f64, params: PySystemParams) -> PyResult<f64> {
    py.detach(|| correlations::SeriesEvaluator::new(&params.0).map(|ev| ev.eval(delta0).g2)).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (delta0, params, rel_tol=None))]
fn g2_integral(py: Python<'_>, delta0: f64, params: PySystemParams, rel_tol: Option<f64>) -> PyResult<f64> {
    py.detach(|| correlations::g2_integral(delta0, &params.0, &quadrature(rel_tol)).map(|r| r.g2)).map_err(to_py)
}

#[pyfunction]
fn g2_approx(delta0: f64, params: PySystemParams) -> PyResult<f64> {
    correlations::g2_approx(delta0, &params.0).map_err(to_py)
}

#[pyfunction]
fn g2_bad_cavity(delta0: f64, params: PySystemParams) -> PyResult<f64> {
    correlations::g2_bad_cavity(delta0, &params.0).map_err(to_py)
}

/// Minimum of g2 over the detuning: `(delta0_opt, g2_min)`.
///
/// `mode` is one of `formula`, `scan`, `scan_full_range`, `approx_scan`.
#[pyfunction]
#[pyo3(signature = (params, mode="scan"))]
fn g2_min(py: Python<'_>, params: PySystemParams, mode: &str) -> PyResult<(f64, f64)> {
    let mode = match mode {
        "formula" => G2MinMode::Formula,
        "scan" => G2MinMode::Scan,
        "scan_full_range" => G2MinMode::ScanFullRange,
        "approx_scan" => G2MinMode::ApproxScan,
        other => return Err(PyValueError::new_err(format!("unknown mode '{other}'"))),
    };
    py.detach(|| correlations::g2_min(&params.0, mode))
        .map(|m| (m.delta0_opt, m.g2_min))
        .map_err(to_py)
}

fn truncation(params: &blockade_core::SystemParams, n_photon_max: Option<usize>, n_phonon_max: Option<usize>) -> TruncationSpec {
    let mut t = TruncationSpec::for_params(params);
    if let Some(n) = n_photon_max {
        t.n_photon_max = n;
    }
    if let Some(n) = n_phonon_max {
        t.n_phonon_max = n;
    }
    t
}

fn result_dict<'py>(py: Python<'py>, r: &SteadyStateResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mean_photon", r.mean_photon)?;
    d.set_item("two_photon_moment", r.two_photon_moment)?;
    d.set_item("g2", r.g2)?;
    d.set_item("mean_phonon", r.mean_phonon)?;
    d.set_item("trace_defect", r.trace_defect)?;
    d.set_item("hermiticity_defect", r.hermiticity_defect)?;
    d.set_item("min_eigenvalue", r.min_eigenvalue)?;
    d.set_item("leakage", r.leakage)?;
    let method = match r.method {
        SteadyStateMethod::Nullspace => "nullspace",
        SteadyStateMethod::TimeIntegration => "time_integration",
        SteadyStateMethod::Auto => "auto",
    };
    d.set_item("method", method)?;
    Ok(d)
}

/// Master-equation steady state of the driven system, as a dict.
#[pyfunction]
#[pyo3(signature = (params, n_photon_max=None, n_phonon_max=None, method="auto"))]
fn steady_state<'py>(
    py: Python<'py>,
    params: PySystemParams,
    n_photon_max: Option<usize>,
    n_phonon_max: Option<usize>,
    method: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let method = match method {
        "auto" => SteadyStateMethod::Auto,
        "nullspace" => SteadyStateMethod::Nullspace,
        "time_integration" => SteadyStateMethod::TimeIntegration,
        other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    };
    let trunc = truncation(&params.0, n_photon_max, n_phonon_max);
    let r = py.detach(|| oracle::steady_state(&params.0, &trunc, method)).map_err(to_py)?;
    result_dict(py, &r)
}

/// Zero-drive limit of g2 and of the normalized photon number.
#[pyfunction]
#[pyo3(signature = (params, drives, n_photon_max=None, n_phonon_max=None))]
fn weak_drive_extrapolation<'py>(
    py: Python<'py>,
    params: PySystemParams,
    drives: Vec<f64>,
    n_photon_max: Option<usize>,
    n_phonon_max: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let trunc = truncation(&params.0, n_photon_max, n_phonon_max);
    let r = py
        .detach(|| oracle::weak_drive_extrapolation(&params.0, &trunc, &drives))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("g2", r.g2)?;
    d.set_item("g2_slope", r.g2_slope)?;
    d.set_item("spectrum", r.spectrum)?;
    d.set_item("spectrum_slope", r.spectrum_slope)?;
    d.set_item("max_leakage", r.max_leakage())?;
    d.set_item("warnings", r.warnings.clone())?;
    let runs = r
        .runs
        .iter()
        .map(|(e, run)| Ok((*e, result_dict(py, run)?)))
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("runs", runs)?;
    Ok(d)
}

#[pymodule]
fn blockade(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemParams>()?;
    m.add_class::<PySeriesEvaluator>()?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add("TruncationError", m.py().get_type::<TruncationError>())?;
    m.add_function(wrap_pyfunction!(bessel_i, m)?)?;
    m.add_function(wrap_pyfunction!(laguerre_assoc, m)?)?;
    m.add_function(wrap_pyfunction!(w_coeff, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_dephasing, m)?)?;
    m.add_function(wrap_pyfunction!(a_coeff, m)?)?;
    m.add_function(wrap_pyfunction!(s_series, m)?)?;
    m.add_function(wrap_pyfunction!(s_integral, m)?)?;
    m.add_function(wrap_pyfunction!(s_bad_cavity, m)?)?;
    m.add_function(wrap_pyfunction!(b_coeff_t0, m)?)?;
    m.add_function(wrap_pyfunction!(g2_series, m)?)?;
    m.add_function(wrap_pyfunction!(g2_integral, m)?)?;
    m.add_function(wrap_pyfunction!(g2_approx, m)?)?;
    m.add_function(wrap_pyfunction!(g2_bad_cavity, m)?)?;
    m.add_function(wrap_pyfunction!(g2_min, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(weak_drive_extrapolation, m)?)?;
    Ok(())
}
