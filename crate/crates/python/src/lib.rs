//! Python bindings: smooth-max kernels, the tracking optimization, and the
//! gradient and nonexistence checks.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use supctrl_core::experiments::{self, switching_control, GRADCHECK_PAIRS, GRADCHECK_STEP};
use supctrl_core::problem::ProblemDefinition;
use supctrl_core::{
    problem_grid, projected_gradient, Error, Fig1Tracking, NonexistenceDemo, OptimizerConfig, Span, Trajectory,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::AssertionFailure(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// `1/k log sum exp(k v_i)`.
#[pyfunction]
fn lse(values: Vec<f64>, k: f64) -> PyResult<f64> {
    supctrl_core::lse(&values, k).map_err(to_py)
}

/// Smoothed maximum of a window sampled with step `dt`, and its weight density.
#[pyfunction]
fn lie_window(values: Vec<f64>, dt: f64, k: f64) -> PyResult<(f64, Vec<f64>)> {
    let r = supctrl_core::lie_window(&values, dt, k).map_err(to_py)?;
    Ok((r.value, r.weights))
}

/// Optimizes the tracking problem from `u = 0`. Returns a dict with the forward
/// time nodes, control, state, adjoint, objective, stationarity, termination,
/// iteration count, and detected jumps.
#[pyfunction]
#[pyo3(signature = (dt=1e-3, k=1e4, tol=1e-6, max_iters=20_000, alpha=None, beta=None))]
fn solve_tracking<'py>(
    py: Python<'py>,
    dt: f64,
    k: f64,
    tol: f64,
    max_iters: usize,
    alpha: Option<f64>,
    beta: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let base = Fig1Tracking::default();
    let (lo, hi) = base.control_bounds();
    let p = Fig1Tracking::new(alpha.unwrap_or(base.alpha), beta.unwrap_or(base.beta), base.tau(), base.horizon(), lo[0], hi[0])
        .map_err(to_py)?;
    let grid = problem_grid(&p, dt).map_err(to_py)?;
    let config = OptimizerConfig { tol_stationarity: tol, max_iters, ..Default::default() };
    let u0 = Trajectory::zeros(grid, 1, Span::Forward);
    let report = py.detach(|| projected_gradient(&p, k, &grid, &config, &u0)).map_err(to_py)?;

    let nh = grid.n_hist();
    let nodes = 0..=grid.n_fwd();
    let out = PyDict::new(py);
    out.set_item("t", nodes.clone().map(|j| grid.forward_time(j)).collect::<Vec<_>>())?;
    out.set_item("u", report.control.values().to_vec())?;
    out.set_item("x", nodes.map(|j| report.state.node(nh + j)[0]).collect::<Vec<_>>())?;
    out.set_item("lambda", report.adjoint.lambda.values().to_vec())?;
    out.set_item("objective", report.objective())?;
    out.set_item("stationarity", report.stationarity())?;
    out.set_item("termination", format!("{:?}", report.termination))?;
    out.set_item("iterations", report.iterations)?;
    let jumps: Vec<(f64, f64, f64)> = report.jumps.iter().map(|j| (j.time, j.magnitude, j.predicted)).collect();
    out.set_item("jumps", jumps)?;
    Ok(out)
}

/// Relative errors of the adjoint gradient against central differences on
/// random feasible controls and directions of the tracking problem.
#[pyfunction]
#[pyo3(signature = (dt=1e-2, k=1e3, pairs=GRADCHECK_PAIRS, seed=0))]
fn gradient_check(dt: f64, k: f64, pairs: usize, seed: u64) -> PyResult<Vec<f64>> {
    let p = Fig1Tracking::default();
    let grid = problem_grid(&p, dt).map_err(to_py)?;
    experiments::gradient_check(&p, &grid, k, pairs, GRADCHECK_STEP, seed).map_err(to_py)
}

/// Objective of the nonexistence problem under the switching control of the
/// given frequency, or under `u = 1` when no frequency is given.
#[pyfunction]
#[pyo3(signature = (frequency=None, dt=1e-4))]
fn nonexistence_objective(frequency: Option<f64>, dt: f64) -> PyResult<f64> {
    let p = NonexistenceDemo::default();
    let grid = problem_grid(&p, dt).map_err(to_py)?;
    match frequency {
        Some(f) => experiments::nonexistence_objective(&p, &grid, |t| switching_control(f, t)),
        None => experiments::nonexistence_objective(&p, &grid, |_| 1.0),
    }
    .map_err(to_py)
}

#[pymodule]
fn supctrl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(lse, m)?)?;
    m.add_function(wrap_pyfunction!(lie_window, m)?)?;
    m.add_function(wrap_pyfunction!(solve_tracking, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_check, m)?)?;
    m.add_function(wrap_pyfunction!(nonexistence_objective, m)?)?;
    Ok(())
}
