//! Python bindings: expressions, problems, the three solvers, the horizon
//! formulas and the running-max and quadrature primitives.

use maxode::catalog::{guarantee, GuaranteeOptions};
use maxode::horizon::{self, ContractionData, HorizonResult};
use maxode::integrate;
use maxode::picard::{solve_picard, PicardConfig};
use maxode::trajectory::RunningMaxTrack;
use maxode::{verify, Grid, ProblemSpec};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

#[pyclass(name = "Expr", frozen, skip_from_py_object, module = "pymaxode")]
#[derive(Clone)]
struct PyExpr(maxode::Expr);

#[pymethods]
impl PyExpr {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        maxode::parse(text).map(PyExpr).map_err(value_err)
    }

    #[pyo3(signature = (t, x, m = Vec::new()))]
    fn eval(&self, t: f64, x: Vec<f64>, m: Vec<f64>) -> PyResult<f64> {
        self.0.eval(t, &x, &m).map_err(value_err)
    }

    fn __str__(&self) -> String {
        maxode::print(&self.0)
    }

    fn __repr__(&self) -> String {
        format!("Expr('{}')", self.0)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

#[pyclass(name = "Problem", frozen, skip_from_py_object, module = "pymaxode")]
#[derive(Clone)]
struct PyProblem(ProblemSpec);

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (f, x0, horizon, maxima = Vec::new()))]
    fn new(f: Vec<String>, x0: Vec<f64>, horizon: f64, maxima: Vec<String>) -> PyResult<Self> {
        ProblemSpec::from_strings(&f, &maxima, x0, horizon).map(PyProblem).map_err(value_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        ProblemSpec::from_json_str(text).map(PyProblem).map_err(value_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        ProblemSpec::load(path).map(PyProblem).map_err(value_err)
    }

    fn to_json(&self) -> String {
        self.0.canonical()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn x0(&self) -> Vec<f64> {
        self.0.x0().to_vec()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.0.horizon()
    }

    #[getter]
    fn rhs(&self) -> Vec<String> {
        self.0.rhs().iter().map(maxode::print).collect()
    }

    #[getter]
    fn maxima(&self) -> Vec<String> {
        self.0.maxima().iter().map(maxode::print).collect()
    }

    fn with_x0(&self, x0: Vec<f64>) -> PyResult<Self> {
        self.0.with_x0(x0).map(PyProblem).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Problem({})", self.0.canonical())
    }
}

/// Sampled solution: times, states and running maxima, one row per node.
#[pyclass(name = "Trajectory", frozen, module = "pymaxode")]
struct PyTrajectory {
    #[pyo3(get)]
    t: Vec<f64>,
    #[pyo3(get)]
    x: Vec<Vec<f64>>,
    #[pyo3(get)]
    maxima: Vec<Vec<f64>>,
}

impl PyTrajectory {
    fn build(spec: &ProblemSpec, traj: &maxode::Trajectory) -> PyResult<Self> {
        let track = RunningMaxTrack::for_trajectory(traj, spec.maxima()).map_err(runtime_err)?;
        Ok(PyTrajectory {
            t: traj.grid().nodes().collect(),
            x: traj.states().map(<[f64]>::to_vec).collect(),
            maxima: (0..traj.len()).map(|k| track.row(k).to_vec()).collect(),
        })
    }
}

#[pymethods]
impl PyTrajectory {
    fn __len__(&self) -> usize {
        self.t.len()
    }

    fn component(&self, i: usize) -> PyResult<Vec<f64>> {
        if self.x.first().is_none_or(|r| i >= r.len()) {
            return Err(value_err(format!("component {i} out of range")));
        }
        Ok(self.x.iter().map(|r| r[i]).collect())
    }
}

fn make_grid(spec: &ProblemSpec, steps: usize, t_end: Option<f64>) -> PyResult<Grid> {
    Grid::over(t_end.unwrap_or(spec.horizon()).min(spec.horizon()), steps).map_err(value_err)
}

#[pyfunction]
fn parse(text: &str) -> PyResult<PyExpr> {
    PyExpr::new(text)
}

/// Canonical, fully parenthesized form of an expression string.
#[pyfunction]
fn canonical(text: &str) -> PyResult<String> {
    maxode::parse(text).map(|e| maxode::print(&e)).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (problem, method = "heun", steps = 1000, t_end = None))]
fn solve(py: Python<'_>, problem: &PyProblem, method: &str, steps: usize, t_end: Option<f64>) -> PyResult<PyTrajectory> {
    let spec = &problem.0;
    let grid = make_grid(spec, steps, t_end)?;
    let traj = match method {
        "euler" => py.detach(|| integrate::euler_max(spec, &grid)).map_err(runtime_err)?,
        "heun" => py.detach(|| integrate::heun_max(spec, &grid)).map_err(runtime_err)?,
        "picard" => {
            let cfg = PicardConfig::new(grid, 1e-12, 200);
            let (traj, rep) = py.detach(|| solve_picard(spec, &cfg)).map_err(runtime_err)?;
            if !rep.converged {
                return Err(runtime_err(format!("Picard iteration did not converge in {} iterations", rep.n_iters)));
            }
            traj
        }
        other => return Err(value_err(format!("unknown method {other:?}; expected euler, heun or picard"))),
    };
    PyTrajectory::build(spec, &traj)
}

/// Runs the Picard iteration; returns the final iterate and a report dict
/// with `n_iters`, `deltas`, `converged` and `bound_violations`.
#[pyfunction]
#[pyo3(signature = (problem, steps = 1000, t_end = None, tol = 1e-12, max_iter = 200, contraction = None))]
fn picard<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    steps: usize,
    t_end: Option<f64>,
    tol: f64,
    max_iter: usize,
    contraction: Option<f64>,
) -> PyResult<(PyTrajectory, Bound<'py, PyDict>)> {
    let spec = &problem.0;
    let mut cfg = PicardConfig::new(make_grid(spec, steps, t_end)?, tol, max_iter);
    cfg.contraction = contraction;
    let (traj, rep) = py.detach(|| solve_picard(spec, &cfg)).map_err(runtime_err)?;
    let d = PyDict::new(py);
    d.set_item("n_iters", rep.n_iters)?;
    d.set_item("deltas", rep.deltas)?;
    d.set_item("bound_curve", rep.bound_curve)?;
    d.set_item("converged", rep.converged)?;
    d.set_item("bound_violations", rep.bound_violations)?;
    Ok((PyTrajectory::build(spec, &traj)?, d))
}

fn horizon_dict<'py>(py: Python<'py>, data: &ContractionData, r: &HorizonResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t_sup", r.t_sup)?;
    d.set_item("t_rec", r.t_rec)?;
    d.set_item("contraction_factor", r.contraction_factor)?;
    d.set_item("branch", format!("{:?}", r.branch).to_lowercase())?;
    d.set_item("m_bound", data.m_bound)?;
    d.set_item("l_f", data.l_f)?;
    d.set_item("l_g", data.l_g)?;
    Ok(d)
}

/// Contraction horizon from estimated constants over the `alpha`-box.
#[pyfunction]
#[pyo3(signature = (problem, alpha = 1.0))]
fn estimate_horizon<'py>(py: Python<'py>, problem: &PyProblem, alpha: f64) -> PyResult<Bound<'py, PyDict>> {
    let (data, r) = horizon::horizon_for(&problem.0, alpha).map_err(value_err)?;
    horizon_dict(py, &data, &r)
}

/// Contraction horizon from given constants.
#[pyfunction]
#[pyo3(signature = (alpha, t_ref, m_bound, l_f, l_g, dim = 1))]
fn existence_horizon<'py>(
    py: Python<'py>,
    alpha: f64,
    t_ref: f64,
    m_bound: f64,
    l_f: f64,
    l_g: f64,
    dim: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let data = ContractionData { alpha, t_ref, m_bound, l_f, l_g, dim };
    let r = horizon::existence_horizon(&data).map_err(value_err)?;
    horizon_dict(py, &data, &r)
}

#[pyfunction]
fn logistic_horizon(x0: f64, alpha: f64) -> PyResult<f64> {
    horizon::logistic_horizon(x0, alpha).map_err(value_err)
}

/// `(alpha_star, t_star)`; `alpha_star` is None when `x0 = 0`.
#[pyfunction]
fn logistic_horizon_opt(x0: f64) -> (Option<f64>, f64) {
    let o = horizon::logistic_horizon_opt(x0);
    (o.alpha_star, o.t_star)
}

/// `(feasible, slacks)` for the four coupled quadratic inequalities.
#[pyfunction]
fn quadratic_feasible(x0: f64, y0: f64, t: f64, c0: f64) -> (bool, [f64; 4]) {
    let f = horizon::quadratic_feasible(x0, y0, t, c0);
    (f.feasible, f.slacks)
}

#[pyfunction]
fn quadratic_search(x0: f64, y0: f64, t: f64) -> Option<f64> {
    horizon::quadratic_search(x0, y0, t)
}

/// `(ok, reason)`: whether an existence result covers `[0, t_end]`.
#[pyfunction]
#[pyo3(signature = (problem, t_end, alpha = 1.0, c0 = None))]
fn covered(problem: &PyProblem, t_end: f64, alpha: f64, c0: Option<f64>) -> PyResult<(bool, String)> {
    let g = guarantee(&problem.0, t_end, GuaranteeOptions { alpha, c0 }).map_err(value_err)?;
    Ok((g.ok, g.reason))
}

#[pyfunction]
fn prefix_max(samples: Vec<f64>) -> Vec<f64> {
    maxode::trajectory::prefix_max(&samples)
}

#[pyfunction]
fn cumint(samples: Vec<f64>, h: f64) -> Vec<f64> {
    maxode::trajectory::cumint(&samples, h)
}

/// Runs the verification suite; returns `(id, key, passed, detail)` rows.
#[pyfunction]
#[pyo3(signature = (filter = None, seed = None))]
fn run_verify(py: Python<'_>, filter: Option<String>, seed: Option<u64>) -> Vec<(usize, String, bool, String)> {
    let opts = verify::VerifyOptions { eps_grid: None, seed, filter };
    py.detach(|| verify::run(&opts))
        .into_iter()
        .map(|r| (r.id, r.key.to_string(), r.passed, r.detail))
        .collect()
}

#[pymodule]
fn pymaxode(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpr>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(canonical, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(picard, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_horizon, m)?)?;
    m.add_function(wrap_pyfunction!(existence_horizon, m)?)?;
    m.add_function(wrap_pyfunction!(logistic_horizon, m)?)?;
    m.add_function(wrap_pyfunction!(logistic_horizon_opt, m)?)?;
    m.add_function(wrap_pyfunction!(quadratic_feasible, m)?)?;
    m.add_function(wrap_pyfunction!(quadratic_search, m)?)?;
    m.add_function(wrap_pyfunction!(covered, m)?)?;
    m.add_function(wrap_pyfunction!(prefix_max, m)?)?;
    m.add_function(wrap_pyfunction!(cumint, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    Ok(())
}
