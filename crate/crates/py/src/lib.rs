//! Python bindings for `fraclap`.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fraclap::dirichlet::{EllipticSolver, Forcing, ParabolicProblem, ParabolicStepper, TimeScheme};
use fraclap::domain::graded_grid;
use fraclap::fraclap_op::{build_dirichlet_operator, expected_exit_time, getoor_constant};
use fraclap::harness::{run_check, CheckId, SweepConfig};
use fraclap::killed_mc::{simulate_killed_paths, MCConfig};
use fraclap::norms::{fit_boundary_decay, weighted_lp_norm, WeightSpec};
use fraclap::stable_kernel::{self, scaling_check, total_mass, KernelQuery};
use fraclap::{Domain, Error, Grid, GridFunction};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter { .. } | Error::Config(_) | Error::Unsupported(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn alpha(a: f64) -> PyResult<fraclap::Alpha> {
    fraclap::Alpha::new(a).map_err(to_py)
}

fn interval(a: f64, b: f64) -> PyResult<Domain> {
    Domain::interval(a, b).map_err(to_py)
}

/// `p_d(t, x)` of the free symmetric α-stable process; `x` has length `d`.
#[pyfunction]
fn density(alpha_value: f64, t: f64, x: Vec<f64>) -> PyResult<f64> {
    let q = KernelQuery::new(alpha(alpha_value)?, t, x).map_err(to_py)?;
    stable_kernel::density(&q).map_err(to_py)
}

#[pyfunction]
#[pyo3(name = "scaling_check")]
fn py_scaling_check(alpha_value: f64, t: f64, x: Vec<f64>) -> PyResult<f64> {
    scaling_check(alpha(alpha_value)?, x.len(), t, &x).map_err(to_py)
}

#[pyfunction]
#[pyo3(name = "total_mass")]
fn py_total_mass(alpha_value: f64, dim: usize) -> PyResult<f64> {
    total_mass(alpha(alpha_value)?, dim).map_err(to_py)
}

/// `-Δ^{α/2} (1-|x|²)_+^{α/2}` on the unit ball of `R^d`.
#[pyfunction]
#[pyo3(name = "getoor_constant")]
fn py_getoor_constant(alpha_value: f64, dim: usize) -> PyResult<f64> {
    Ok(getoor_constant(alpha(alpha_value)?, dim))
}

#[pyfunction]
#[pyo3(name = "expected_exit_time", signature = (alpha_value, dim, x_norm=0.0))]
fn py_expected_exit_time(alpha_value: f64, dim: usize, x_norm: f64) -> PyResult<f64> {
    Ok(expected_exit_time(alpha(alpha_value)?, dim, x_norm))
}

/// Graded grid on an interval; nodes cluster at both endpoints.
#[pyclass(name = "Grid", frozen)]
struct PyGrid {
    inner: Grid,
}

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (n, a=-1.0, b=1.0, grading=2.0))]
    fn new(n: usize, a: f64, b: f64, grading: f64) -> PyResult<Self> {
        let inner = graded_grid(&interval(a, b)?, n, grading, None).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Grid(n={}, [{}, {}])", self.inner.len(), self.inner.lo(), self.inner.hi())
    }
}

/// Dense discretization of `Δ^{α/2}` with zero exterior values.
#[pyclass(name = "DirichletOperator", frozen)]
struct PyOperator {
    inner: Arc<fraclap::DirichletOperator>,
    domain: Domain,
}

#[pymethods]
impl PyOperator {
    #[new]
    fn new(grid: &PyGrid, alpha_value: f64) -> PyResult<Self> {
        let domain = interval(grid.inner.lo(), grid.inner.hi())?;
        let op = build_dirichlet_operator(&domain, &grid.inner, alpha(alpha_value)?).map_err(to_py)?;
        Ok(Self { inner: Arc::new(op), domain })
    }

    fn apply(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        if u.len() != self.inner.len() {
            return Err(PyValueError::new_err("length does not match the grid"));
        }
        Ok(self.inner.apply(&u))
    }

    /// Solves `Δ^{α/2} u - λu = f`.
    #[pyo3(signature = (f, lam=0.0))]
    fn solve_elliptic(&self, py: Python<'_>, f: Vec<f64>, lam: f64) -> PyResult<Vec<f64>> {
        let op = self.inner.clone();
        py.detach(move || EllipticSolver::new(op, lam)?.solve(&f)).map_err(to_py)
    }

    /// Implicit Euler from `u0` with a time-independent forcing; returns
    /// `(times, values)` with one row per step including `t = 0`.
    #[pyo3(signature = (u0, f, t_final, steps))]
    fn solve_parabolic(
        &self,
        py: Python<'_>,
        u0: Vec<f64>,
        f: Vec<f64>,
        t_final: f64,
        steps: usize,
    ) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let op = self.inner.clone();
        let domain = self.domain.clone();
        py.detach(move || {
            let u0 = GridFunction::new(op.grid.clone(), u0)?;
            let problem = ParabolicProblem {
                domain,
                alpha: op.alpha,
                t_final,
                u0,
                f: Forcing::steady(f),
            };
            let series = ParabolicStepper::new(&op, t_final / steps as f64, TimeScheme::ImplicitEuler)?.run(&problem, steps)?;
            Ok((series.times, series.values))
        })
        .map_err(to_py)
    }

    /// `‖ψ^{psi_power} u‖_{L_{p,θ}}`.
    fn weighted_lp_norm(&self, u: Vec<f64>, p: f64, theta: f64, psi_power: f64) -> PyResult<f64> {
        let g = GridFunction::new(self.inner.grid.clone(), u).map_err(to_py)?;
        weighted_lp_norm(&g, &WeightSpec::new(p, theta, psi_power).map_err(to_py)?).map_err(to_py)
    }

    /// Least-squares exponent of `|u| ~ ρ^κ` over `ρ ∈ window`.
    #[pyo3(signature = (u, window=(1e-3, 0.05)))]
    fn boundary_decay(&self, u: Vec<f64>, window: (f64, f64)) -> PyResult<f64> {
        let g = GridFunction::new(self.inner.grid.clone(), u).map_err(to_py)?;
        fit_boundary_decay(&g, window).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Killed Monte Carlo exit times from `x0` in `(a, b)`; returns a dict with
/// `mean`, `std_err` and `censored`.
#[pyfunction]
#[pyo3(signature = (alpha_value, x0=0.0, n_paths=10_000, dt=1e-3, seed=0, a=-1.0, b=1.0, t_max=None))]
#[allow(clippy::too_many_arguments)]
fn exit_time<'py>(
    py: Python<'py>,
    alpha_value: f64,
    x0: f64,
    n_paths: usize,
    dt: f64,
    seed: u64,
    a: f64,
    b: f64,
    t_max: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let al = alpha(alpha_value)?;
    let cfg = MCConfig {
        seed,
        n_paths,
        dt,
        t_max: t_max.unwrap_or(100.0),
        domain: interval(a, b)?,
        alpha: al,
    };
    let stats = py
        .detach(move || simulate_killed_paths(&cfg, &[x0], &[]).map(|e| e.exit_time_stats()))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mean", stats.mean)?;
    d.set_item("std_err", stats.std_err)?;
    d.set_item("censored", stats.censored)?;
    Ok(d)
}

/// Runs one verification check. `config` is TOML text in the sweep-config
/// format; the result is `(passed, report_json)`.
#[pyfunction]
#[pyo3(signature = (check, config=""))]
fn verify(py: Python<'_>, check: &str, config: &str) -> PyResult<(bool, String)> {
    let id: CheckId = check.parse().map_err(to_py)?;
    let mut cfg = SweepConfig::from_toml_str(config).map_err(to_py)?;
    cfg.check = Some(id);
    let report = py.detach(move || run_check(id, &cfg)).map_err(to_py)?;
    Ok((report.passed(), report.to_json().to_string()))
}

#[pymodule]
fn fraclap_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(density, m)?)?;
    m.add_function(wrap_pyfunction!(py_scaling_check, m)?)?;
    m.add_function(wrap_pyfunction!(py_total_mass, m)?)?;
    m.add_function(wrap_pyfunction!(py_getoor_constant, m)?)?;
    m.add_function(wrap_pyfunction!(py_expected_exit_time, m)?)?;
    m.add_function(wrap_pyfunction!(exit_time, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyOperator>()?;
    Ok(())
}
