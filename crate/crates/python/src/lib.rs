//! Python bindings: build systems from JSON, evaluate pointwise quantities and
//! run experiments, exchanging reports as JSON text.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use relent_core::cli::{self, Command};
use relent_core::error::Error;
use relent_core::experiments::SystemConfig;
use relent_core::linalg::State;
use relent_core::relent as rel;
use relent_core::systems::{self, BalanceLaw};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A balance law built from its JSON system block.
#[pyclass(name = "System", frozen)]
struct PySystem {
    law: Arc<dyn BalanceLaw>,
    config: SystemConfig,
}

impl PySystem {
    fn state(&self, u: Vec<f64>) -> PyResult<State> {
        if u.len() != self.law.n() {
            return Err(PyValueError::new_err(format!(
                "state has {} components, system has {}",
                u.len(),
                self.law.n()
            )));
        }
        Ok(State::from_vec(u))
    }
}

#[pymethods]
impl PySystem {
    /// `System('{"kind": "duct_gas"}', horizon=1.0)`.
    #[new]
    #[pyo3(signature = (config_json, horizon = 1.0))]
    fn new(config_json: &str, horizon: f64) -> PyResult<Self> {
        let config: SystemConfig = serde_json::from_str(config_json).map_err(json_err)?;
        config.validate().map_err(py_err)?;
        let law = config.build(horizon).map_err(py_err)?;
        SystemConfig::quiescent_history(&law, horizon).map_err(py_err)?;
        Ok(Self { law, config })
    }

    #[getter]
    fn name(&self) -> String {
        self.law.name().to_string()
    }

    #[getter]
    fn components(&self) -> usize {
        self.law.n()
    }

    fn config_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.config).map_err(json_err)
    }

    fn a(&self, u: Vec<f64>, x: f64, t: f64) -> PyResult<Vec<f64>> {
        let u = self.state(u)?;
        self.law.check(&u, &[x], t).map_err(py_err)?;
        Ok(self.law.a(&u, &[x], t).iter().copied().collect())
    }

    fn invert_a(&self, v: Vec<f64>, x: f64, t: f64, guess: Vec<f64>) -> PyResult<Vec<f64>> {
        let v = self.state(v)?;
        let g = self.state(guess)?;
        let u = systems::invert_a(self.law.as_ref(), &v, &[x], t, &g).map_err(py_err)?;
        Ok(u.iter().copied().collect())
    }

    fn eta(&self, u: Vec<f64>, x: f64, t: f64) -> PyResult<f64> {
        let u = self.state(u)?;
        self.law.check(&u, &[x], t).map_err(py_err)?;
        Ok(self.law.eta(&u, &[x], t))
    }

    fn flux(&self, u: Vec<f64>, x: f64, t: f64) -> PyResult<Vec<f64>> {
        let u = self.state(u)?;
        self.law.check(&u, &[x], t).map_err(py_err)?;
        Ok(self.law.flux(0, &u, &[x], t).iter().copied().collect())
    }

    fn r(&self, u: Vec<f64>, x: f64, t: f64) -> PyResult<Vec<f64>> {
        let u = self.state(u)?;
        let r = systems::eval_r(self.law.as_ref(), &u, &[x], t).map_err(py_err)?;
        Ok(r.iter().copied().collect())
    }

    fn rel_entropy(&self, u: Vec<f64>, ub: Vec<f64>, x: f64, t: f64) -> PyResult<f64> {
        let (u, ub) = (self.state(u)?, self.state(ub)?);
        rel::rel_entropy(self.law.as_ref(), &u, &ub, &[x], t).map_err(py_err)
    }

    fn rel_entropy_flux(&self, u: Vec<f64>, ub: Vec<f64>, x: f64, t: f64) -> PyResult<f64> {
        let (u, ub) = (self.state(u)?, self.state(ub)?);
        let q = rel::rel_entropy_flux(self.law.as_ref(), &u, &ub, &[x], t).map_err(py_err)?;
        Ok(q[0])
    }

    fn __repr__(&self) -> String {
        format!("System({:?}, components={})", self.law.name(), self.law.n())
    }
}

fn command(name: &str) -> PyResult<Command> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown command {name:?}")))
}

/// Validates a run config and returns it with every default filled in.
#[pyfunction]
#[pyo3(signature = (config_json, overrides = Vec::new()))]
fn parse_config(config_json: &str, overrides: Vec<String>) -> PyResult<String> {
    let parsed = cli::parse_config_with(config_json, &overrides).map_err(py_err)?;
    serde_json::to_string(&parsed.config).map_err(json_err)
}

/// Runs `command` on a config and returns the report as JSON. With `out`,
/// also writes the CSVs, plot scripts and manifest there.
#[pyfunction]
#[pyo3(signature = (command_name, config_json, overrides = Vec::new(), out = None))]
fn run_experiment(
    py: Python<'_>,
    command_name: &str,
    config_json: &str,
    overrides: Vec<String>,
    out: Option<std::path::PathBuf>,
) -> PyResult<String> {
    let cmd = command(command_name)?;
    let mut config = cli::parse_config_with(config_json, &overrides).map_err(py_err)?.config;
    config.command = Some(cmd);
    let mut report = py.detach(|| cli::dispatch(cmd, &config));
    if let Some(dir) = out {
        cli::emit_outputs(&mut report, &dir).map_err(py_err)?;
    }
    serde_json::to_string(&report).map_err(json_err)
}

/// Sampled hypothesis audit; shorthand for `run_experiment("audit", ...)`.
#[pyfunction]
#[pyo3(signature = (config_json, overrides = Vec::new()))]
fn audit(py: Python<'_>, config_json: &str, overrides: Vec<String>) -> PyResult<String> {
    run_experiment(py, "audit", config_json, overrides, None)
}

/// Single solver run; shorthand for `run_experiment("solve", ...)`.
#[pyfunction]
#[pyo3(signature = (config_json, overrides = Vec::new()))]
fn solve(py: Python<'_>, config_json: &str, overrides: Vec<String>) -> PyResult<String> {
    run_experiment(py, "solve", config_json, overrides, None)
}

#[pymodule]
fn relent(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystem>()?;
    m.add_function(wrap_pyfunction!(parse_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
