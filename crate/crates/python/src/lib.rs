//! Python bindings. Configurations, problems and results cross the boundary
//! as JSON-compatible dicts (or JSON strings on input).

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyString;

use cmsdr::conic::{solve as solve_conic, ConicProblem, SolverSettings};
use cmsdr::gf2::{generate_asymmetric_code, load_alist, write_alist, DEFAULT_D_MAX};
use cmsdr::pipeline::{run_grid, run_sweep, run_trial as run_one, Method, SweepGrid, TrialConfig};
use cmsdr::Error;

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        4 => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Accepts a JSON string or any object `json.dumps` can serialize.
fn json_text(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.cast::<PyString>() {
        return Ok(s.to_string());
    }
    py.import("json")?.call_method1("dumps", (obj,))?.extract()
}

fn to_object<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn config(py: Python<'_>, obj: Option<&Bound<'_, PyAny>>) -> PyResult<TrialConfig> {
    match obj {
        Some(o) => TrialConfig::from_json(&json_text(py, o)?).map_err(to_py),
        None => Ok(TrialConfig::default()),
    }
}

/// The default trial configuration as a dict.
#[pyfunction]
fn default_config(py: Python<'_>) -> PyResult<Py<PyAny>> {
    to_object(py, &TrialConfig::default())
}

/// Runs one trial and returns its report.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn run_trial(py: Python<'_>, config: Option<&Bound<'_, PyAny>>) -> PyResult<Py<PyAny>> {
    let cfg = self::config(py, config)?;
    let report = py.detach(|| run_one(&cfg)).map_err(to_py)?;
    to_object(py, &report)
}

/// Runs an SNR x method grid. Returns `{"summary": [...], "reports": [...]}`
/// and also writes the CSV when `output` is given.
#[pyfunction]
#[pyo3(signature = (snr_db, trials, methods, config=None, output=None, timing=false))]
fn sweep(
    py: Python<'_>,
    snr_db: Vec<f64>,
    trials: usize,
    methods: Vec<String>,
    config: Option<&Bound<'_, PyAny>>,
    output: Option<PathBuf>,
    timing: bool,
) -> PyResult<Py<PyAny>> {
    let base = self::config(py, config)?;
    let methods = methods.iter().map(|m| m.parse::<Method>()).collect::<cmsdr::Result<Vec<_>>>().map_err(to_py)?;
    let grid = SweepGrid { snr_db, trials, methods };
    let outcome = py.detach(|| run_grid(&grid, &base)).map_err(to_py)?;
    if let Some(path) = output {
        py.detach(|| run_sweep(&grid, &base, &path, timing)).map_err(to_py)?;
    }
    let reports: Vec<_> = outcome.reports.iter().map(|(_, r)| r).collect();
    to_object(py, &serde_json::json!({ "summary": outcome.summary, "reports": reports }))
}

/// Solves a conic problem given in the `cmsdr-conic-v1` JSON layout.
#[pyfunction]
#[pyo3(signature = (problem, settings=None))]
fn solve(py: Python<'_>, problem: &Bound<'_, PyAny>, settings: Option<&Bound<'_, PyAny>>) -> PyResult<Py<PyAny>> {
    let p = ConicProblem::from_json(&json_text(py, problem)?).map_err(to_py)?;
    let s: SolverSettings = match settings {
        Some(o) => serde_json::from_str(&json_text(py, o)?).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => SolverSettings::default(),
    };
    let sol = py.detach(|| solve_conic(&p, &s)).map_err(to_py)?;
    to_object(py, &sol)
}

/// An asymmetric full-rank parity-check matrix as alist text.
#[pyfunction]
#[pyo3(signature = (n, m, row_degree=3, seed=0))]
fn generate_code(n: usize, m: usize, row_degree: usize, seed: u64) -> PyResult<String> {
    Ok(write_alist(&generate_asymmetric_code(n, m, row_degree, seed).map_err(to_py)?))
}

/// Shape, rank, asymmetry and parity-inequality count of alist text.
#[pyfunction]
#[pyo3(signature = (alist, d_max=DEFAULT_D_MAX))]
fn check_code(py: Python<'_>, alist: &str, d_max: usize) -> PyResult<Py<PyAny>> {
    let h = load_alist(alist).map_err(to_py)?;
    let verdict = h.is_asymmetric();
    to_object(
        py,
        &serde_json::json!({
            "rows": h.rows(),
            "cols": h.cols(),
            "rank": h.rank(),
            "asymmetric": verdict.asymmetric,
            "odd_weight_row": verdict.odd_row,
            "parity_inequalities": h.parity_inequality_count(d_max).map_err(to_py)?,
        }),
    )
}

#[pymodule]
fn cmsdr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(generate_code, m)?)?;
    m.add_function(wrap_pyfunction!(check_code, m)?)?;
    Ok(())
}
