//! Forward solvers for the running-maximum state equation.
//!
//! Every solver here uses the same discrete system:
//!
//! ```text
//! x_{j+1} = x_j + dt * (F0(x_j, v_j) + F1(x_j, v_j) u_j),   j = 0 .. n_fwd - 1
//! ```
//!
//! where `v_j` is the (hard or smoothed) componentwise maximum over the `N =
//! tau / dt` samples at forward nodes `j - N, ..., j - 1`. Those are full-grid
//! nodes `j, ..., j + N - 1`, so near `t = 0` the window reaches into the
//! history. Picard iteration and the integral residual use the same
//! left-rectangle sums, which makes their fixed point the Euler solution.

use crate::error::{Error, Result};
use crate::grid::{Span, TimeGrid, Trajectory};
use crate::problem::{affine_rhs, ProblemDefinition, RhsScratch};
use crate::window::{ScaledExp, SlidingLogSumExp, SlidingMax};

/// How the window maximum enters the dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxMode {
    /// Exact window maximum.
    Hard,
    /// LogIntExp smoothing with sharpness `k`.
    Regularized { k: f64 },
}

impl MaxMode {
    pub fn sharpness(&self) -> Option<f64> {
        match *self {
            MaxMode::Hard => None,
            MaxMode::Regularized { k } => Some(k),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            MaxMode::Regularized { k } if !(k > 0.0 && k.is_finite()) => Err(Error::BadSharpness(k)),
            _ => Ok(()),
        }
    }
}

/// Smoothing densities of every forward step, stored `[step][sample][component]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightCache {
    n: usize,
    window: usize,
    data: Vec<f64>,
}

impl WeightCache {
    fn new(steps: usize, window: usize, n: usize) -> Self {
        Self { n, window, data: vec![0.0; steps * window * n] }
    }

    /// Weights of step `j`; entry `i * n + c` belongs to forward node `j - N + i`.
    pub fn step(&self, j: usize) -> &[f64] {
        let len = self.window * self.n;
        &self.data[j * len..(j + 1) * len]
    }

    fn step_mut(&mut self, j: usize) -> &mut [f64] {
        let len = self.window * self.n;
        &mut self.data[j * len..(j + 1) * len]
    }

    pub fn steps(&self) -> usize {
        self.data.len() / (self.window * self.n).max(1)
    }
}

#[derive(Debug, Clone)]
pub struct ForwardSolveOutput {
    /// State on `[-tau, T]`.
    pub state: Trajectory,
    /// Window maximum (hard or smoothed) fed to the dynamics at each forward node.
    pub aux_v: Trajectory,
    pub weights: Option<WeightCache>,
    pub mode: MaxMode,
}

/// Evaluates `v_j` for a given full-grid state array, visiting steps in
/// increasing order from 0 (after [`reset`](Self::reset)).
pub(crate) struct WindowEvaluator {
    n: usize,
    window: usize,
    dt: f64,
    k: f64,
    hard: Vec<SlidingMax>,
    smooth: Vec<SlidingLogSumExp>,
    pushed: usize,
    popped: usize,
    /// Shifted window sums of the last evaluated step, one per component.
    sums: Vec<ScaledExp>,
}

impl WindowEvaluator {
    pub(crate) fn new(mode: MaxMode, grid: &TimeGrid, n: usize) -> Self {
        let window = grid.n_hist();
        let (hard, smooth, k) = match mode {
            MaxMode::Hard => (vec![SlidingMax::with_capacity(window); n], Vec::new(), f64::NAN),
            MaxMode::Regularized { k } => (Vec::new(), vec![SlidingLogSumExp::new(k, window); n], k),
        };
        Self { n, window, dt: grid.dt(), k, hard, smooth, pushed: 0, popped: 0, sums: vec![ScaledExp::EMPTY; n] }
    }

    pub(crate) fn reset(&mut self) {
        self.pushed = 0;
        self.popped = 0;
        self.hard.iter_mut().for_each(SlidingMax::clear);
        self.smooth.iter_mut().for_each(SlidingLogSumExp::clear);
    }

    /// Window value at forward step `j`; with `weights`, also the smoothing
    /// density stored sample-major.
    pub(crate) fn eval(&mut self, state: &[f64], j: usize, v: &mut [f64], weights: Option<&mut [f64]>) {
        let (n, window) = (self.n, self.window);
        let end = j + window; // exclusive, full-grid node index
        if self.smooth.is_empty() {
            while self.pushed < end {
                let node = self.pushed;
                for (c, d) in self.hard.iter_mut().enumerate() {
                    d.push(node, state[node * n + c]);
                }
                self.pushed += 1;
            }
            for (c, d) in self.hard.iter_mut().enumerate() {
                d.expire(j);
                v[c] = d.max().expect("window is non-empty").1;
            }
            return;
        }
        while self.pushed < end {
            let node = self.pushed;
            for (c, q) in self.smooth.iter_mut().enumerate() {
                q.push(state[node * n + c], 1.0);
            }
            self.pushed += 1;
        }
        while self.popped < j {
            self.smooth.iter_mut().for_each(SlidingLogSumExp::pop);
            self.popped += 1;
        }
        for (c, q) in self.smooth.iter().enumerate() {
            let sum = q.sum();
            self.sums[c] = sum;
            v[c] = sum.r + (self.dt * sum.s).ln() / self.k;
        }
        if let Some(w) = weights {
            for c in 0..n {
                let ScaledExp { r, s } = self.sums[c];
                let mass = self.dt * s;
                for i in 0..window {
                    w[i * n + c] = (self.k * (state[(j + i) * n + c] - r)).exp() / mass;
                }
            }
        }
    }

    pub(crate) fn sums(&self) -> &[ScaledExp] {
        &self.sums
    }
}

/// Shifted window sums `(max, sum exp(k (x_i - max)))` of every forward step,
/// stored `[step][component]`.
pub(crate) fn window_sums(state: &Trajectory, k: f64) -> Vec<ScaledExp> {
    let grid = state.grid();
    let n = state.dim();
    let mut eval = WindowEvaluator::new(MaxMode::Regularized { k }, grid, n);
    let mut v = vec![0.0; n];
    let mut out = Vec::with_capacity(grid.n_fwd() * n);
    for j in 0..grid.n_fwd() {
        eval.eval(state.values(), j, &mut v, None);
        out.extend_from_slice(eval.sums());
    }
    out
}

/// Grid for a problem with step `dt`.
pub fn problem_grid(problem: &dyn ProblemDefinition, dt: f64) -> Result<TimeGrid> {
    TimeGrid::new(problem.tau(), problem.horizon(), dt)
}

pub(crate) fn check_consistency(problem: &dyn ProblemDefinition, grid: &TimeGrid, control: &Trajectory) -> Result<()> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    if !close(grid.tau(), problem.tau()) || !close(grid.horizon(), problem.horizon()) {
        return Err(Error::DimensionMismatch(format!(
            "grid [{}, {}] does not match problem [{}, {}]",
            -grid.tau(),
            grid.horizon(),
            -problem.tau(),
            problem.horizon()
        )));
    }
    if control.span() != Span::Forward || control.dim() != problem.control_dim() || control.grid() != grid {
        return Err(Error::DimensionMismatch(format!(
            "control must be a forward trajectory of dimension {} on the solve grid",
            problem.control_dim()
        )));
    }
    Ok(())
}

fn history_trajectory(problem: &dyn ProblemDefinition, grid: &TimeGrid) -> Trajectory {
    let mut state = Trajectory::zeros(*grid, problem.state_dim(), Span::Full);
    for i in 0..=grid.n_hist() {
        let t = grid.time(i);
        problem.history(t, state.node_mut(i));
    }
    state
}

fn euler(
    problem: &dyn ProblemDefinition,
    control: &Trajectory,
    grid: &TimeGrid,
    mode: MaxMode,
    cache_weights: bool,
) -> Result<ForwardSolveOutput> {
    mode.validate()?;
    check_consistency(problem, grid, control)?;
    let n = problem.state_dim();
    let m = problem.control_dim();
    let (nh, nf, dt) = (grid.n_hist(), grid.n_fwd(), grid.dt());

    let mut state = history_trajectory(problem, grid);
    let mut aux_v = Trajectory::zeros(*grid, n, Span::Forward);
    let mut weights = match (mode, cache_weights) {
        (MaxMode::Regularized { .. }, true) => Some(WeightCache::new(nf, nh, n)),
        _ => None,
    };

    let mut eval = WindowEvaluator::new(mode, grid, n);
    let mut scratch = RhsScratch::new(n, m);
    let mut rhs = vec![0.0; n];
    let mut v = vec![0.0; n];

    for j in 0..=nf {
        let w = weights.as_mut().filter(|_| j < nf).map(|c| c.step_mut(j));
        eval.eval(state.values(), j, &mut v, w);
        aux_v.node_mut(j).copy_from_slice(&v);
        if j == nf {
            break;
        }
        let values = state.values_mut();
        let (head, tail) = values.split_at_mut((nh + j + 1) * n);
        let x = &head[(nh + j) * n..];
        affine_rhs(problem, x, &v, control.node(j), &mut scratch, &mut rhs);
        let next = &mut tail[..n];
        for c in 0..n {
            next[c] = x[c] + dt * rhs[c];
            if !next[c].is_finite() {
                return Err(Error::NonFinite { t: grid.forward_time(j + 1), component: c });
            }
        }
    }

    Ok(ForwardSolveOutput { state, aux_v, weights, mode })
}

/// Explicit Euler for the LogIntExp-smoothed state equation.
pub fn integrate_regularized(
    problem: &dyn ProblemDefinition,
    control: &Trajectory,
    k: f64,
    grid: &TimeGrid,
    cache_weights: bool,
) -> Result<ForwardSolveOutput> {
    euler(problem, control, grid, MaxMode::Regularized { k }, cache_weights)
}

/// Explicit Euler for the state equation with the exact window maximum.
pub fn integrate_hardmax(problem: &dyn ProblemDefinition, control: &Trajectory, grid: &TimeGrid) -> Result<ForwardSolveOutput> {
    euler(problem, control, grid, MaxMode::Hard, false)
}

/// Either solver, selected by `mode`.
pub fn integrate(
    problem: &dyn ProblemDefinition,
    control: &Trajectory,
    grid: &TimeGrid,
    mode: MaxMode,
) -> Result<ForwardSolveOutput> {
    euler(problem, control, grid, mode, false)
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub output: ForwardSolveOutput,
    pub iterations: usize,
    /// Sup-norm distance between consecutive iterates, one entry per iteration.
    pub residual_history: Vec<f64>,
}

/// Fixed-point iteration on the integral form of the state equation, starting
/// from `x_0(t) = phi(min(t, 0))`.
pub fn picard_solve(
    problem: &dyn ProblemDefinition,
    control: &Trajectory,
    grid: &TimeGrid,
    mode: MaxMode,
    tol: f64,
    max_iter: usize,
) -> Result<PicardOutcome> {
    mode.validate()?;
    check_consistency(problem, grid, control)?;
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let n = problem.state_dim();
    let m = problem.control_dim();
    let (nh, nf, dt) = (grid.n_hist(), grid.n_fwd(), grid.dt());

    let mut prev = history_trajectory(problem, grid);
    let phi0 = prev.node(nh).to_vec();
    for j in 1..=nf {
        prev.node_mut(nh + j).copy_from_slice(&phi0);
    }
    let mut next = prev.clone();

    let mut eval = WindowEvaluator::new(mode, grid, n);
    let mut scratch = RhsScratch::new(n, m);
    let mut rhs = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut sum = vec![0.0; n];
    let mut residual_history = Vec::new();

    for iteration in 1..=max_iter {
        eval.reset();
        sum.copy_from_slice(&phi0);
        let mut residual: f64 = 0.0;
        for j in 0..nf {
            eval.eval(prev.values(), j, &mut v, None);
            affine_rhs(problem, prev.node(nh + j), &v, control.node(j), &mut scratch, &mut rhs);
            let target = next.node_mut(nh + j + 1);
            for c in 0..n {
                sum[c] += dt * rhs[c];
                if !sum[c].is_finite() {
                    return Err(Error::NonFinite { t: grid.forward_time(j + 1), component: c });
                }
                target[c] = sum[c];
            }
            for (s, p) in sum.iter().zip(prev.node(nh + j + 1)) {
                residual = residual.max((s - p).abs());
            }
        }
        residual_history.push(residual);
        std::mem::swap(&mut prev, &mut next);
        if residual < tol {
            let mut aux_v = Trajectory::zeros(*grid, n, Span::Forward);
            eval.reset();
            for j in 0..=nf {
                eval.eval(prev.values(), j, &mut v, None);
                aux_v.node_mut(j).copy_from_slice(&v);
            }
            let output = ForwardSolveOutput { state: prev, aux_v, weights: None, mode };
            return Ok(PicardOutcome { output, iterations: iteration, residual_history });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: residual_history.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// `sup_t |x(t) - phi(0) - sum_{s < t} dt F(x(s), v(s), u(s))|` over forward nodes,
/// with the same quadrature the solvers use.
pub fn integral_residual(
    state: &Trajectory,
    control: &Trajectory,
    problem: &dyn ProblemDefinition,
    mode: MaxMode,
) -> Result<f64> {
    mode.validate()?;
    let grid = *state.grid();
    check_consistency(problem, &grid, control)?;
    if state.span() != Span::Full || state.dim() != problem.state_dim() {
        return Err(Error::DimensionMismatch("state must be a full-span trajectory of dimension n".into()));
    }
    let n = problem.state_dim();
    let (nh, nf, dt) = (grid.n_hist(), grid.n_fwd(), grid.dt());

    let mut phi0 = vec![0.0; n];
    problem.history(0.0, &mut phi0);
    let mut eval = WindowEvaluator::new(mode, &grid, n);
    let mut scratch = RhsScratch::new(n, problem.control_dim());
    let mut rhs = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut sum = phi0.clone();

    let mut residual = (0..n).map(|c| (state.node(nh)[c] - phi0[c]).abs()).fold(0.0, f64::max);
    for j in 0..nf {
        eval.eval(state.values(), j, &mut v, None);
        affine_rhs(problem, state.node(nh + j), &v, control.node(j), &mut scratch, &mut rhs);
        for c in 0..n {
            sum[c] += dt * rhs[c];
            residual = residual.max((state.node(nh + j + 1)[c] - sum[c]).abs());
        }
    }
    Ok(residual)
}

/// Left-rectangle quadrature of the running cost plus the terminal cost.
pub fn evaluate_objective(problem: &dyn ProblemDefinition, output: &ForwardSolveOutput, control: &Trajectory) -> f64 {
    let grid = output.state.grid();
    let (nh, nf, dt) = (grid.n_hist(), grid.n_fwd(), grid.dt());
    // compensated summation keeps line-search comparisons meaningful near convergence
    let (mut total, mut carry) = (0.0f64, 0.0f64);
    for j in 0..nf {
        let term = problem.running_cost(grid.forward_time(j), output.state.node(nh + j), control.node(j));
        let t = total + term;
        carry += if total.abs() >= term.abs() { (total - t) + term } else { (term - t) + total };
        total = t;
    }
    dt * (total + carry) + problem.terminal_cost(output.state.node(nh + nf))
}
