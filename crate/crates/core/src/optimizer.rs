//! Projected gradient descent with Armijo backtracking on the smoothed,
//! discretized reduced problem.

use crate::adjoint::{
    detect_jumps, gradient_from_adjoint, projected_gradient_norm, solve_discrete_adjoint, AdjointOutput, JumpRecord,
    DEFAULT_SPIKE_THRESHOLD,
};
use crate::dynamics::{evaluate_objective, integrate_regularized, ForwardSolveOutput};
use crate::error::{Error, Result};
use crate::grid::{TimeGrid, Trajectory};
use crate::problem::{validate_bounds, ProblemDefinition};

/// First trial step of each line search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialStep {
    /// Always `step0`.
    Fixed,
    /// Barzilai-Borwein step from the last two iterates, clamped to
    /// `[min_step, 1e6 * step0]`; `step0` on the first iteration.
    BarzilaiBorwein,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub step0: f64,
    pub tol_stationarity: f64,
    pub min_step: f64,
    pub initial_step: InitialStep,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            armijo_c: 1e-4,
            backtrack: 0.5,
            step0: 1.0,
            tol_stationarity: 1e-8,
            min_step: 1e-14,
            initial_step: InitialStep::BarzilaiBorwein,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(Error::Config(what.to_string())) };
        check(self.armijo_c > 0.0 && self.armijo_c < 1.0, "armijo_c must lie in (0, 1)")?;
        check(self.backtrack > 0.0 && self.backtrack < 1.0, "backtrack must lie in (0, 1)")?;
        check(self.step0 > 0.0 && self.step0.is_finite(), "step0 must be positive")?;
        check(self.tol_stationarity > 0.0, "tol_stationarity must be positive")?;
        check(self.min_step > 0.0 && self.min_step <= self.step0, "min_step must lie in (0, step0]")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
    StepStall,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub control: Trajectory,
    pub state: Trajectory,
    pub adjoint: AdjointOutput,
    pub gradient: Trajectory,
    /// Objective at the initial control and after every accepted step.
    pub objective_history: Vec<f64>,
    /// Stationarity at the initial control and after every accepted step.
    pub stationarity_history: Vec<f64>,
    pub jumps: Vec<JumpRecord>,
    pub iterations: usize,
    pub termination: Termination,
    /// Forward solve at the final control.
    pub forward: ForwardSolveOutput,
}

impl SolveReport {
    pub fn objective(&self) -> f64 {
        *self.objective_history.last().expect("history holds the initial objective")
    }

    pub fn stationarity(&self) -> f64 {
        *self.stationarity_history.last().expect("history holds the initial stationarity")
    }
}

/// Componentwise clip of `u` into `[lo, hi]`.
pub fn project_box(u: &Trajectory, lo: &[f64], hi: &[f64]) -> Result<Trajectory> {
    validate_bounds(lo, hi)?;
    if lo.len() != u.dim() {
        return Err(Error::DimensionMismatch(format!("bounds of length {} for controls of dimension {}", lo.len(), u.dim())));
    }
    let mut out = u.clone();
    project_in_place(&mut out, lo, hi);
    Ok(out)
}

fn project_in_place(u: &mut Trajectory, lo: &[f64], hi: &[f64]) {
    let m = u.dim();
    for (idx, v) in u.values_mut().iter_mut().enumerate() {
        *v = v.clamp(lo[idx % m], hi[idx % m]);
    }
}

struct Iterate {
    control: Trajectory,
    fwd: ForwardSolveOutput,
    objective: f64,
    adjoint: AdjointOutput,
    gradient: Trajectory,
}

fn complete(problem: &dyn ProblemDefinition, control: Trajectory, fwd: ForwardSolveOutput, objective: f64, k: f64, grid: &TimeGrid) -> Result<Iterate> {
    let adjoint = solve_discrete_adjoint(problem, &fwd, &control, Some(k), grid)?;
    let gradient = gradient_from_adjoint(problem, &fwd, &adjoint, &control);
    Ok(Iterate { control, fwd, objective, adjoint, gradient })
}

/// `dt * sum g . d` over the forward steps that carry weight in the objective.
fn inner(a: &Trajectory, b: &Trajectory, grid: &TimeGrid) -> f64 {
    let m = a.dim();
    let steps = grid.n_fwd() * m;
    grid.dt() * a.values()[..steps].iter().zip(&b.values()[..steps]).map(|(x, y)| x * y).sum::<f64>()
}

/// Minimizes the smoothed discrete objective over the control box, starting
/// from the projection of `u0`.
pub fn projected_gradient(
    problem: &dyn ProblemDefinition,
    k: f64,
    grid: &TimeGrid,
    config: &OptimizerConfig,
    u0: &Trajectory,
) -> Result<SolveReport> {
    config.validate()?;
    let (lo, hi) = problem.control_bounds();
    let control = project_box(u0, lo, hi)?;

    let fwd = integrate_regularized(problem, &control, k, grid, false)?;
    let objective = evaluate_objective(problem, &fwd, &control);
    let mut it = complete(problem, control, fwd, objective, k, grid)?;
    let mut stationarity = projected_gradient_norm(&it.control, &it.gradient, lo, hi);
    let mut objective_history = vec![it.objective];
    let mut stationarity_history = vec![stationarity];

    let mut iterations = 0;
    let mut previous: Option<(Trajectory, Trajectory)> = None;
    let termination = loop {
        if stationarity < config.tol_stationarity {
            break Termination::Converged;
        }
        if iterations >= config.max_iters {
            break Termination::MaxIters;
        }

        let mut step = match (config.initial_step, &previous) {
            (InitialStep::BarzilaiBorwein, Some((u_prev, g_prev))) => {
                let s: Vec<f64> = it.control.values().iter().zip(u_prev.values()).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = it.gradient.values().iter().zip(g_prev.values()).map(|(a, b)| a - b).collect();
                let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
                let ss: f64 = s.iter().map(|a| a * a).sum();
                if sy > 0.0 {
                    (ss / sy).clamp(config.min_step, 1e6 * config.step0)
                } else {
                    config.step0
                }
            }
            _ => config.step0,
        };

        let accepted = loop {
            if step < config.min_step {
                break None;
            }
            let mut trial = it.control.clone();
            for (v, g) in trial.values_mut().iter_mut().zip(it.gradient.values()) {
                *v -= step * g;
            }
            project_in_place(&mut trial, lo, hi);
            let mut diff = it.control.clone();
            for (d, t) in diff.values_mut().iter_mut().zip(trial.values()) {
                *d -= t;
            }
            let decrease = inner(&it.gradient, &diff, grid);
            match integrate_regularized(problem, &trial, k, grid, false) {
                Ok(fwd) => {
                    let value = evaluate_objective(problem, &fwd, &trial);
                    if value.is_finite() && value < it.objective && value <= it.objective - config.armijo_c * decrease {
                        break Some((trial, fwd, value));
                    }
                }
                Err(Error::NonFinite { .. }) => {}
                Err(e) => return Err(e),
            }
            step *= config.backtrack;
        };

        let Some((trial, fwd, value)) = accepted else {
            break Termination::StepStall;
        };
        let next = complete(problem, trial, fwd, value, k, grid)?;
        let old = std::mem::replace(&mut it, next);
        previous = Some((old.control, old.gradient));
        iterations += 1;
        stationarity = projected_gradient_norm(&it.control, &it.gradient, lo, hi);
        objective_history.push(it.objective);
        stationarity_history.push(stationarity);
    };

    let jumps = detect_jumps(&it.adjoint, &it.fwd, &it.control, problem, grid, DEFAULT_SPIKE_THRESHOLD);
    Ok(SolveReport {
        state: it.fwd.state.clone(),
        control: it.control,
        adjoint: it.adjoint,
        gradient: it.gradient,
        objective_history,
        stationarity_history,
        jumps,
        iterations,
        termination,
        forward: it.fwd,
    })
}
