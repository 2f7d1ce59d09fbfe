//! Python bindings: grids, fields, the Picard solver, its reference
//! solvers, the well-posedness gate and the experiment runner.
//!
//! Structured results (diagnostics, reports, run records) are returned as
//! plain dicts decoded from their JSON form.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

use km_spectral::dynamics::{
    mass_balance_residual, total_mass, KmParams, MuSign, Trajectory as CoreTrajectory,
};
use km_spectral::lab::BetaLemmaCase;
use km_spectral::oracles;
use km_spectral::picard::{self, PicardSettings, WellPosednessGate};
use km_spectral::runner::{self, parse_override, Command, RunConfig};
use km_spectral::spaces::{lp_norm, sobolev_norm, LpExponent, SobolevIndex};
use km_spectral::spectral::{self, forward_transform, inverse_transform, GridSpec, RealField};
use km_spectral::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config { key, message } => PyValueError::new_err(format!("config error at `{key}`: {message}")),
        Error::InvalidArgument(_)
        | Error::InvalidGrid(_)
        | Error::InvalidField(_)
        | Error::GridMismatch
        | Error::MissingDimensionalParameters
        | Error::NotAdmitted(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn mu_sign(name: &str) -> PyResult<MuSign> {
    match name {
        "paper" => Ok(MuSign::Paper),
        "epidemiological" => Ok(MuSign::Epidemiological),
        other => Err(PyValueError::new_err(format!(
            "mu_sign must be `paper` or `epidemiological`, got `{other}`"
        ))),
    }
}

fn lp(p: f64) -> PyResult<LpExponent> {
    match p {
        1.0 => Ok(LpExponent::One),
        2.0 => Ok(LpExponent::Two),
        4.0 => Ok(LpExponent::Four),
        f64::INFINITY => Ok(LpExponent::Infinity),
        _ => Err(PyValueError::new_err(format!("p must be 1, 2, 4 or inf, got {p}"))),
    }
}

fn index(s: f64) -> PyResult<SobolevIndex> {
    SobolevIndex::new(s).map_err(py_err)
}

/// Periodic grid on `[-half_length, half_length)`.
#[pyclass(frozen, skip_from_py_object, name = "Grid")]
#[derive(Clone, Copy)]
struct PyGrid(GridSpec);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (n_points = spectral::DEFAULT_POINTS, half_length = spectral::DEFAULT_HALF_LENGTH))]
    fn new(n_points: usize, half_length: f64) -> PyResult<Self> {
        GridSpec::new(n_points, half_length).map(Self).map_err(py_err)
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.0.n_points()
    }

    #[getter]
    fn half_length(&self) -> f64 {
        self.0.half_length()
    }

    fn points(&self) -> Vec<f64> {
        self.0.points().collect()
    }

    fn __repr__(&self) -> String {
        format!("Grid(n_points={}, half_length={})", self.0.n_points(), self.0.half_length())
    }
}

/// Real samples on a grid.
#[pyclass(frozen, skip_from_py_object, name = "Field")]
#[derive(Clone)]
struct PyField(RealField);

#[pymethods]
impl PyField {
    #[new]
    fn new(grid: &PyGrid, samples: Vec<f64>) -> PyResult<Self> {
        RealField::new(grid.0, samples).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn constant(grid: &PyGrid, value: f64) -> Self {
        Self(RealField::constant(grid.0, value))
    }

    #[staticmethod]
    fn gaussian_bump(grid: &PyGrid, center: f64, width: f64, height: f64) -> PyResult<Self> {
        spectral::gaussian_bump(grid.0, center, width, height)
            .map(Self)
            .map_err(py_err)
    }

    #[staticmethod]
    fn band_limited(grid: &PyGrid, seed: u64, cutoff: usize, amplitude: f64) -> PyResult<Self> {
        spectral::random_band_limited_field(seed, cutoff, amplitude, grid.0)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.0.grid())
    }

    fn samples(&self) -> Vec<f64> {
        self.0.samples().to_vec()
    }

    fn mean(&self) -> f64 {
        self.0.mean()
    }

    fn sobolev_norm(&self, s: f64) -> PyResult<f64> {
        Ok(sobolev_norm(&self.0, index(s)?))
    }

    fn lp_norm(&self, p: f64) -> PyResult<f64> {
        Ok(lp_norm(&self.0, lp(p)?))
    }

    /// `S(t) f`.
    fn heat(&self, t: f64) -> PyResult<Self> {
        inverse_transform(&forward_transform(&self.0).heat(t))
            .map(Self)
            .map_err(py_err)
    }

    /// `|D|^r f`.
    fn riesz(&self, r: f64) -> PyResult<Self> {
        inverse_transform(&forward_transform(&self.0).riesz(r))
            .map(Self)
            .map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.0.samples().len()
    }
}

#[pyclass(frozen, name = "Trajectory")]
struct PyTrajectory(CoreTrajectory);

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times().to_vec()
    }

    fn u(&self, n: usize) -> PyResult<PyField> {
        self.slice(n).map(|s| PyField(s.u().clone()))
    }

    fn v(&self, n: usize) -> PyResult<PyField> {
        self.slice(n).map(|s| PyField(s.v().clone()))
    }

    /// `X^s` norm reports of both components.
    fn xs_norms(&self, py: Python<'_>) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
        let (u, v) = self.0.xs_norms().map_err(py_err)?;
        Ok((to_py(py, &u)?, to_py(py, &v)?))
    }

    fn pair_norm(&self) -> PyResult<f64> {
        self.0.pair_norm().map_err(py_err)
    }

    fn total_mass(&self) -> Vec<f64> {
        total_mass(&self.0)
    }

    fn mass_balance_residual(&self) -> PyResult<Vec<f64>> {
        mass_balance_residual(&self.0).map_err(py_err)
    }

    fn sup_l2_distance(&self, other: &PyTrajectory) -> PyResult<f64> {
        self.0.sup_l2_distance(&other.0).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.0.times().len()
    }
}

impl PyTrajectory {
    fn slice(&self, n: usize) -> PyResult<&km_spectral::dynamics::KmState> {
        self.0
            .states()
            .get(n)
            .ok_or_else(|| PyValueError::new_err(format!("slice {n} out of range")))
    }
}

/// Empirical well-posedness gate built from measured constants.
#[pyclass(frozen, from_py_object, name = "Gate")]
#[derive(Clone, Copy)]
struct PyGate(WellPosednessGate);

#[pymethods]
impl PyGate {
    #[new]
    fn new(c_ell_hat: f64, c_b_hat: f64, mu: f64) -> PyResult<Self> {
        WellPosednessGate::new(c_ell_hat, c_b_hat, mu)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.0.rho
    }

    #[getter]
    fn data_threshold(&self) -> f64 {
        self.0.data_threshold
    }

    #[getter]
    fn horizon_bound(&self) -> f64 {
        self.0.horizon_bound
    }

    fn check(&self, py: Python<'_>, phi: &PyField, psi: &PyField, s: f64, horizon: f64) -> PyResult<Py<PyAny>> {
        let decision = picard::smallness_check(&phi.0, &psi.0, index(s)?, &self.0, horizon);
        to_py(py, &decision)
    }
}

/// Picard iteration from zero; returns the trajectory and its diagnostics.
#[pyfunction]
#[pyo3(signature = (phi, psi, horizon, n_t, s = 1.0, mu = 1.0, mu_sign = "paper", tol = 1e-10, max_iter = 50, gate = None))]
#[allow(clippy::too_many_arguments)]
fn picard_solve(
    py: Python<'_>,
    phi: &PyField,
    psi: &PyField,
    horizon: f64,
    n_t: usize,
    s: f64,
    mu: f64,
    mu_sign: &str,
    tol: f64,
    max_iter: usize,
    gate: Option<PyGate>,
) -> PyResult<(PyTrajectory, Py<PyAny>)> {
    let params = KmParams::new(mu, self::mu_sign(mu_sign)?).map_err(py_err)?;
    let settings = PicardSettings {
        tol,
        max_iter,
        gate: gate.map(|g| g.0),
    };
    let idx = index(s)?;
    let (traj, diag) = py
        .detach(|| picard::picard_solve(&phi.0, &psi.0, params, idx, horizon, n_t, &settings))
        .map_err(py_err)?;
    Ok((PyTrajectory(traj), to_py(py, &diag)?))
}

/// Strang splitting reference solver with step `dt`.
#[pyfunction]
#[pyo3(signature = (phi, psi, horizon, dt, s = 1.0, mu = 1.0, mu_sign = "paper"))]
#[allow(clippy::too_many_arguments)]
fn splitting_solve(
    py: Python<'_>,
    phi: &PyField,
    psi: &PyField,
    horizon: f64,
    dt: f64,
    s: f64,
    mu: f64,
    mu_sign: &str,
) -> PyResult<PyTrajectory> {
    let params = KmParams::new(mu, self::mu_sign(mu_sign)?).map_err(py_err)?;
    let idx = index(s)?;
    py.detach(|| oracles::splitting_solve(&phi.0, &psi.0, &params, idx, horizon, dt))
        .map(PyTrajectory)
        .map_err(py_err)
}

/// RK4 for the spatially constant system; returns `(times, u, v)`.
#[pyfunction]
#[pyo3(signature = (u0, v0, horizon, dt, mu = 1.0, mu_sign = "paper"))]
fn rk4_sir(
    u0: f64,
    v0: f64,
    horizon: f64,
    dt: f64,
    mu: f64,
    mu_sign: &str,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let ode = oracles::rk4_sir(u0, v0, mu, self::mu_sign(mu_sign)?, horizon, dt).map_err(py_err)?;
    Ok((ode.times, ode.u, ode.v))
}

/// `int_0^t (t - tau)^{-a} tau^{-b} dtau` by adaptive quadrature, with the
/// closed form `t^{1-a-b} B(1-a, 1-b)`.
#[pyfunction]
fn beta_integral(a: f64, b: f64, t: f64) -> PyResult<(f64, f64)> {
    let case = BetaLemmaCase::new(a, b, t).map_err(py_err)?;
    let closed = t.powf(-case.r()) * case.beta_value();
    Ok((case.integral().map_err(py_err)?, closed))
}

/// Runs a `kmsir` command from TOML text and returns the run record.
#[pyfunction]
#[pyo3(signature = (command, out_dir, config = "", overrides = Vec::new(), fields = false))]
fn run(
    py: Python<'_>,
    command: &str,
    out_dir: PathBuf,
    config: &str,
    overrides: Vec<String>,
    fields: bool,
) -> PyResult<Py<PyAny>> {
    let cmd = Command::from_name(command)
        .ok_or_else(|| PyValueError::new_err(format!("unknown command `{command}`")))?;
    let parsed = overrides
        .iter()
        .map(|o| parse_override(o))
        .collect::<Result<Vec<_>, _>>()
        .map_err(py_err)?;
    let config = RunConfig::from_toml(config, &parsed).map_err(py_err)?;
    let record = py
        .detach(|| runner::run_config(cmd, &config, &out_dir, fields))
        .map_err(py_err)?;
    to_py(py, &record)
}

#[pymodule]
fn kmsir(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyGate>()?;
    m.add_function(wrap_pyfunction!(picard_solve, m)?)?;
    m.add_function(wrap_pyfunction!(splitting_solve, m)?)?;
    m.add_function(wrap_pyfunction!(rk4_sir, m)?)?;
    m.add_function(wrap_pyfunction!(beta_integral, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
