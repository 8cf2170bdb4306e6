//! Experiment runners behind the command-line tool.

pub mod config;
pub mod output;

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::adjoint::reduced_gradient;
use crate::dynamics::{evaluate_objective, integrate_hardmax, integrate_regularized, problem_grid};
use crate::error::{Error, Result};
use crate::grid::{Span, TimeGrid, Trajectory};
use crate::optimizer::{projected_gradient, OptimizerConfig, SolveReport};
use crate::problem::{NonexistenceDemo, ProblemDefinition, ProblemKind};
use crate::smoothmax::lie_window;

pub use config::{FixedControl, RunConfig};
pub use output::{emit_plot_script, Table};

/// Environment variable capping the worker threads of parameter sweeps.
pub const THREADS_ENV: &str = "SUPCTRL_THREADS";

/// Bound on `|F_x| + |F_y|` for the tracking problem.
pub const FIG1_LIPSCHITZ: f64 = 3.0;

fn sweep_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let threads: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
        builder = builder.num_threads(threads);
    }
    builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn require(config: &RunConfig, kind: ProblemKind) -> Result<Box<dyn ProblemDefinition>> {
    if config.problem.kind != kind {
        return Err(Error::Config(format!("this experiment needs problem {kind:?}, got {:?}", config.problem.kind)));
    }
    config.validate()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Fig1Run {
    pub report: SolveReport,
    pub seconds: f64,
}

/// Optimizes the tracking problem from `u = 0` and writes the solution,
/// jump table, summary, and optionally the plot script into `output_dir`.
pub fn run_fig1(config: &RunConfig) -> Result<Fig1Run> {
    let problem = require(config, ProblemKind::Fig1Tracking)?;
    let grid = problem_grid(problem.as_ref(), config.dt)?;
    let u0 = Trajectory::zeros(grid, problem.control_dim(), Span::Forward);
    let start = Instant::now();
    let report = projected_gradient(problem.as_ref(), config.k, &grid, &config.optimizer, &u0)?;
    let seconds = start.elapsed().as_secs_f64();

    let dir = &config.output_dir;
    create_dir(dir)?;
    output::solution_table(&report).write(&dir.join(output::SOLUTION_FILE))?;
    output::jumps_table(&report.jumps).write(&dir.join(output::JUMPS_FILE))?;
    fs::write(dir.join(output::SUMMARY_FILE), output::summary_text(&report, config.dt, config.k, seconds))?;
    if config.emit_plots {
        emit_plot_script(&report, dir)?;
    }
    Ok(Fig1Run { report, seconds })
}

/// Optimizes at each sharpness in turn, warm-starting from the previous control.
pub fn solve_with_continuation(
    problem: &dyn ProblemDefinition,
    k_list: &[f64],
    grid: &TimeGrid,
    config: &OptimizerConfig,
    u0: &Trajectory,
) -> Result<Vec<SolveReport>> {
    let mut reports: Vec<SolveReport> = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let start = reports.last().map_or(u0, |r| &r.control);
        let report = projected_gradient(problem, k, grid, config, start)?;
        reports.push(report);
    }
    Ok(reports)
}

/// `1 + 2 sign(sin(kappa t))`.
pub fn switching_control(kappa: f64, t: f64) -> f64 {
    let s = (kappa * t).sin();
    1.0 + 2.0 * if s > 0.0 {
        1.0
    } else if s < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Objective of the nonexistence problem for the scalar control `u`, lifted
/// onto the split control and simulated with the exact window maximum.
pub fn nonexistence_objective(problem: &dyn ProblemDefinition, grid: &TimeGrid, u: impl Fn(f64) -> f64) -> Result<f64> {
    let control = Trajectory::from_fn(*grid, 2, Span::Forward, |t, out| out.copy_from_slice(&NonexistenceDemo::lift(u(t))));
    let fwd = integrate_hardmax(problem, &control, grid)?;
    Ok(evaluate_objective(problem, &fwd, &control))
}

/// Objective of the switching controls for each frequency, written to
/// `nonexistence.csv`. Every value must exceed the infimum 1 and the sequence
/// must decrease strictly.
pub fn run_nonexistence(config: &RunConfig, frequencies: &[f64]) -> Result<Vec<(f64, f64)>> {
    let problem = require(config, ProblemKind::NonexistenceDemo)?;
    let grid = problem_grid(problem.as_ref(), config.dt)?;
    let pool = sweep_pool()?;
    let values: Vec<f64> = pool.install(|| {
        frequencies
            .par_iter()
            .map(|&kappa| nonexistence_objective(problem.as_ref(), &grid, |t| switching_control(kappa, t)))
            .collect::<Result<Vec<f64>>>()
    })?;
    let rows: Vec<(f64, f64)> = frequencies.iter().copied().zip(values).collect();

    create_dir(&config.output_dir)?;
    Table { header: vec!["kappa".into(), "objective".into()], rows: rows.iter().map(|&(a, b)| vec![a, b]).collect() }
        .write(&config.output_dir.join("nonexistence.csv"))?;

    if let Some(&(kappa, value)) = rows.iter().find(|r| r.1 <= 1.0) {
        return Err(Error::AssertionFailure(format!("objective {value} at kappa = {kappa} does not exceed the infimum 1")));
    }
    if let Some(w) = rows.windows(2).find(|w| w[1].1 >= w[0].1) {
        return Err(Error::AssertionFailure(format!(
            "objective does not decrease from kappa = {} ({}) to kappa = {} ({})",
            w[0].0, w[0].1, w[1].0, w[1].1
        )));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KConvergenceRow {
    pub k: f64,
    /// `max |x_reg - x_hard|` over the grid.
    pub state_gap: f64,
    /// `dt * sum_j |LIE(window_j) - max(window_j)|` along the hard-max state.
    pub lie_gap: f64,
    /// `(2 |log tau| / k) exp(2 L T)` with `L` = [`FIG1_LIPSCHITZ`].
    pub envelope: f64,
}

fn lie_gap(state: &Trajectory, grid: &TimeGrid, k: f64) -> Result<f64> {
    let (nh, nf, dt) = (grid.n_hist(), grid.n_fwd(), grid.dt());
    let n = state.dim();
    let mut window = vec![0.0; nh];
    let mut total = 0.0;
    for c in 0..n {
        for j in 0..nf {
            for (s, w) in window.iter_mut().enumerate() {
                *w = state.node(j + s)[c];
            }
            let max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            total += dt * (lie_window(&window, dt, k)?.value - max).abs();
        }
    }
    Ok(total)
}

/// Regularized against hard-max solves under the fixed control of `config`,
/// written to `kconv.csv`. Both gaps must decrease strictly along `k_list`.
pub fn run_k_convergence(config: &RunConfig, k_list: &[f64]) -> Result<Vec<KConvergenceRow>> {
    let problem = require(config, ProblemKind::Fig1Tracking)?;
    let grid = problem_grid(problem.as_ref(), config.dt)?;
    let (lo, hi) = problem.control_bounds();
    let m = problem.control_dim();
    let control = Trajectory::from_fn(grid, m, Span::Forward, |t, out| {
        for (c, v) in out.iter_mut().enumerate() {
            *v = config.control.eval(t).clamp(lo[c], hi[c]);
        }
    });
    let hard = integrate_hardmax(problem.as_ref(), &control, &grid)?;
    let growth = (2.0 * FIG1_LIPSCHITZ * problem.horizon()).exp();
    let log_tau = problem.tau().ln().abs();

    let pool = sweep_pool()?;
    let rows: Vec<KConvergenceRow> = pool.install(|| {
        k_list
            .par_iter()
            .map(|&k| {
                let reg = integrate_regularized(problem.as_ref(), &control, k, &grid, false)?;
                Ok(KConvergenceRow {
                    k,
                    state_gap: reg.state.sup_distance(&hard.state),
                    lie_gap: lie_gap(&hard.state, &grid, k)?,
                    envelope: 2.0 * log_tau / k * growth,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    create_dir(&config.output_dir)?;
    Table {
        header: ["k", "state_gap", "lie_gap", "envelope"].iter().map(|h| h.to_string()).collect(),
        rows: rows.iter().map(|r| vec![r.k, r.state_gap, r.lie_gap, r.envelope]).collect(),
    }
    .write(&config.output_dir.join("kconv.csv"))?;

    for w in rows.windows(2) {
        if w[1].state_gap >= w[0].state_gap || w[1].lie_gap >= w[0].lie_gap {
            return Err(Error::AssertionFailure(format!("gaps do not decrease from k = {} to k = {}", w[0].k, w[1].k)));
        }
    }
    Ok(rows)
}

/// Relative errors between central differences of the discrete objective and
/// `dt * sum g . du` for `pairs` random feasible controls and directions.
pub fn gradient_check(
    problem: &dyn ProblemDefinition,
    grid: &TimeGrid,
    k: f64,
    pairs: usize,
    h: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = problem.control_bounds();
    let m = problem.control_dim();
    let steps = grid.n_fwd() * m;
    let objective = |u: &Trajectory| -> Result<f64> {
        let fwd = integrate_regularized(problem, u, k, grid, false)?;
        Ok(evaluate_objective(problem, &fwd, u))
    };
    let mut errors = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let u = Trajectory::from_fn(*grid, m, Span::Forward, |_, out| {
            for (c, v) in out.iter_mut().enumerate() {
                *v = lo[c] + (hi[c] - lo[c]) * rng.gen_range(0.1..0.9);
            }
        });
        let du = Trajectory::from_fn(*grid, m, Span::Forward, |_, out| out.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0)));
        let g = reduced_gradient(problem, &u, k, grid)?.gradient;
        let adjoint = grid.dt() * g.values()[..steps].iter().zip(&du.values()[..steps]).map(|(a, b)| a * b).sum::<f64>();
        let shifted = |sign: f64| {
            let mut v = u.clone();
            v.values_mut().iter_mut().zip(du.values()).for_each(|(x, d)| *x += sign * h * d);
            v
        };
        let fd = (objective(&shifted(1.0))? - objective(&shifted(-1.0))?) / (2.0 * h);
        errors.push((fd - adjoint).abs() / fd.abs().max(adjoint.abs()).max(f64::MIN_POSITIVE));
    }
    Ok(errors)
}

pub const GRADCHECK_PAIRS: usize = 20;
pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_TOL: f64 = 1e-6;

/// Gradient check on the configured problem, written to `gradcheck.csv`.
pub fn run_gradcheck(config: &RunConfig) -> Result<Vec<f64>> {
    let problem = config.validate()?;
    let grid = problem_grid(problem.as_ref(), config.dt)?;
    let errors = gradient_check(problem.as_ref(), &grid, config.k, GRADCHECK_PAIRS, GRADCHECK_STEP, config.seed)?;
    create_dir(&config.output_dir)?;
    Table {
        header: vec!["pair".into(), "relative_error".into()],
        rows: errors.iter().enumerate().map(|(i, &e)| vec![i as f64, e]).collect(),
    }
    .write(&config.output_dir.join("gradcheck.csv"))?;
    let worst = errors.iter().copied().fold(0.0, f64::max);
    if worst >= GRADCHECK_TOL {
        return Err(Error::AssertionFailure(format!("gradient check error {worst:e} exceeds {GRADCHECK_TOL:e}")));
    }
    Ok(errors)
}
