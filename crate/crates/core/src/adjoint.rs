//! Discrete adjoint of the smoothed Euler recursion, the reduced gradient, and
//! diagnostics for adjoint jumps at strict state maxima.
//!
//! With `Phi_j = F0(x_j, v_j) + F1(x_j, v_j) u_j` and `v_j` the LogIntExp of
//! forward nodes `j - N .. j - 1`, the adjoint solves
//!
//! ```text
//! lambda_{n_fwd} = -g'(x_T)
//! lambda_i = lambda_{i+1} (I + dt Phi_x(i)) - dt j_x(i)
//!          + sum_{j in (i, i + N], j < n_fwd} dt^2 lambda_{j+1} Phi_y(j) diag(w_j[i])
//! ```
//!
//! and `g_i = j_u(i) - F1(x_i, v_i)^T lambda_{i+1}` is the gradient of the
//! discrete objective with respect to `u_i`, divided by `dt`.

use crate::dynamics::{check_consistency, evaluate_objective, integrate_regularized, window_sums, ForwardSolveOutput};
use crate::error::{Error, Result};
use crate::grid::{Span, TimeGrid, Trajectory};
use crate::problem::ProblemDefinition;
use crate::window::{ScaledExp, SlidingLogSumExp, SlidingMax};

/// Default spike threshold, as a multiple of the median `|d lambda|`.
pub const DEFAULT_SPIKE_THRESHOLD: f64 = 20.0;

/// Nodes whose `|d lambda|` exceeds this multiple of the median are attached
/// to an adjacent spike cluster.
const CLUSTER_EDGE_FACTOR: f64 = 5.0;

/// Window samples within `CORE_CUT / k` of the maximum carry weight above `exp(-CORE_CUT)`
/// relative to it; they form the core over which a jump is measured.
const CORE_CUT: f64 = 5.0;

const MIN_FLANK: usize = 3;

#[derive(Debug, Clone)]
pub struct AdjointOutput {
    pub lambda: Trajectory,
    /// `(lambda_{j+1} - lambda_j) / dt`; the last node repeats its predecessor.
    pub dlambda: Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecord {
    pub component: usize,
    /// Time of the strict state maximum the jump belongs to.
    pub time: f64,
    /// `lambda(s0+) - lambda(s0-)` measured across the spike cluster.
    pub magnitude: f64,
    /// `-sum dt lambda^T F_y e_c` over steps whose window maximum sits uniquely at `time`.
    pub predicted: f64,
    /// Steps whose window maximum sits uniquely at `time`, if any.
    pub argmax_interval: Option<(f64, f64)>,
    /// Spike cluster in forward nodes (inclusive).
    pub cluster: (usize, usize),
    /// Forward nodes (inclusive) over which the magnitude is measured.
    pub core: (usize, usize),
}

impl JumpRecord {
    pub fn relative_gap(&self) -> f64 {
        (self.magnitude - self.predicted).abs() / self.predicted.abs().max(f64::MIN_POSITIVE)
    }
}

/// Partial derivatives of `Phi_j` at one step.
struct StepJacobians {
    fx: Vec<f64>,
    fy: Vec<f64>,
    tmp: Vec<f64>,
}

impl StepJacobians {
    fn new(n: usize) -> Self {
        Self { fx: vec![0.0; n * n], fy: vec![0.0; n * n], tmp: vec![0.0; n * n] }
    }

    fn eval(&mut self, problem: &dyn ProblemDefinition, x: &[f64], v: &[f64], u: &[f64]) {
        problem.drift_jac_x(x, v, &mut self.fx);
        problem.input_jac_x(x, v, u, &mut self.tmp);
        for (a, b) in self.fx.iter_mut().zip(&self.tmp) {
            *a += b;
        }
        problem.drift_jac_y(x, v, &mut self.fy);
        problem.input_jac_y(x, v, u, &mut self.tmp);
        for (a, b) in self.fy.iter_mut().zip(&self.tmp) {
            *a += b;
        }
    }
}

/// `out = row * M` for a row vector and a row-major `n x n` matrix.
fn row_times(row: &[f64], mat: &[f64], out: &mut [f64]) {
    let n = row.len();
    for (c, o) in out.iter_mut().enumerate() {
        *o = (0..n).map(|r| row[r] * mat[r * n + c]).sum();
    }
}

fn forward_difference(lambda: &Trajectory) -> Trajectory {
    let grid = *lambda.grid();
    let n = lambda.dim();
    let nf = grid.n_fwd();
    let dt = grid.dt();
    let mut d = Trajectory::zeros(grid, n, Span::Forward);
    for j in 0..nf {
        for c in 0..n {
            d.node_mut(j)[c] = (lambda.node(j + 1)[c] - lambda.node(j)[c]) / dt;
        }
    }
    if nf > 0 {
        let last = d.node(nf - 1).to_vec();
        d.node_mut(nf).copy_from_slice(&last);
    }
    d
}

/// Backward sweep for the discrete adjoint of the smoothed system.
///
/// Uses the cached weights of `fwd` when present; otherwise recomputes them
/// with `k`, or with the sharpness stored in `fwd.mode`.
pub fn solve_discrete_adjoint(
    problem: &dyn ProblemDefinition,
    fwd: &ForwardSolveOutput,
    control: &Trajectory,
    k: Option<f64>,
    grid: &TimeGrid,
) -> Result<AdjointOutput> {
    check_consistency(problem, grid, control)?;
    let k = k.or(fwd.mode.sharpness()).unwrap_or(f64::NAN);
    if fwd.weights.is_none() {
        if k.is_nan() {
            return Err(Error::MissingWeights);
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::BadSharpness(k));
        }
    }
    let n = problem.state_dim();
    let (nh, nf, dt) = (grid.n_hist(), grid.n_fwd(), grid.dt());
    let state = &fwd.state;

    let mut lambda = Trajectory::zeros(*grid, n, Span::Forward);
    let mut jac = StepJacobians::new(n);
    let mut row = vec![0.0; n];
    let mut jx = vec![0.0; n];

    if problem.has_terminal_cost() {
        problem.terminal_cost_grad(state.node(nh + nf), &mut jx);
        for (l, g) in lambda.node_mut(nf).iter_mut().zip(&jx) {
            *l = -g;
        }
    }

    // Delayed coupling. With the cache, step j scatters
    // dt^2 c_j w_j[i] onto its window nodes i; without it,
    // w_j[i] = exp(k (x_i - r_j)) / (dt s_j) and the sum over steps
    // j in (i, i + N] is a sliding window of terms (c_j / s_j) exp(-k r_j).
    let mut acc = vec![0.0; (nf + 1) * n];
    let sums = match fwd.weights {
        Some(_) => Vec::new(),
        None => window_sums(state, k),
    };
    let mut delayed: Vec<SlidingLogSumExp> = vec![SlidingLogSumExp::new(k, nh + 1); n];

    for i in (0..nf).rev() {
        let x = state.node(nh + i);
        let v = fwd.aux_v.node(i);
        let u = control.node(i);
        jac.eval(problem, x, v, u);
        let next = lambda.node(i + 1).to_vec();
        row_times(&next, &jac.fy, &mut row);

        match &fwd.weights {
            Some(cache) => {
                let w = cache.step(i);
                // window sample s is forward node i - N + s; history nodes carry no adjoint
                for s in nh.saturating_sub(i)..nh {
                    let node = i + s - nh;
                    for c in 0..n {
                        acc[node * n + c] += dt * dt * row[c] * w[s * n + c];
                    }
                }
            }
            None => {
                // node i receives steps i + 1 ..= i + N
                for c in 0..n {
                    let q = &mut delayed[c];
                    if q.len() > nh {
                        q.pop();
                    }
                    let total = q.sum();
                    if total.s != 0.0 {
                        acc[i * n + c] = dt * total.s * (k * (x[c] + total.r)).exp();
                    }
                    let ScaledExp { r, s } = sums[i * n + c];
                    q.push(-r, row[c] / s);
                }
            }
        }

        problem.running_cost_x(grid.forward_time(i), x, u, &mut jx);
        row_times(&next, &jac.fx, &mut row);
        let out = lambda.node_mut(i);
        for c in 0..n {
            out[c] = next[c] + dt * row[c] - dt * jx[c] + acc[i * n + c];
        }
    }

    if let Some(c) = lambda.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t: grid.forward_time(c / n), component: c % n });
    }
    let dlambda = forward_difference(&lambda);
    Ok(AdjointOutput { lambda, dlambda })
}

/// `g_i = j_u(i) - F1(x_i, v_i)^T lambda_{i+1}`; zero at the final node, which
/// does not influence the objective.
pub fn gradient_from_adjoint(
    problem: &dyn ProblemDefinition,
    fwd: &ForwardSolveOutput,
    adj: &AdjointOutput,
    control: &Trajectory,
) -> Trajectory {
    let grid = *control.grid();
    let n = problem.state_dim();
    let m = problem.control_dim();
    let (nh, nf) = (grid.n_hist(), grid.n_fwd());
    let mut grad = Trajectory::zeros(grid, m, Span::Forward);
    let mut f1 = vec![0.0; n * m];
    let mut ju = vec![0.0; m];
    for i in 0..nf {
        let x = fwd.state.node(nh + i);
        let v = fwd.aux_v.node(i);
        let u = control.node(i);
        problem.input_matrix(x, v, &mut f1);
        problem.running_cost_u(grid.forward_time(i), x, u, &mut ju);
        let lam = adj.lambda.node(i + 1);
        let g = grad.node_mut(i);
        for c in 0..m {
            g[c] = ju[c] - (0..n).map(|r| f1[r * m + c] * lam[r]).sum::<f64>();
        }
    }
    grad
}

#[derive(Debug, Clone)]
pub struct GradientEvaluation {
    pub gradient: Trajectory,
    pub objective: f64,
    pub fwd: ForwardSolveOutput,
    pub adj: AdjointOutput,
}

/// Objective and gradient of the smoothed discrete problem at `control`.
pub fn reduced_gradient(
    problem: &dyn ProblemDefinition,
    control: &Trajectory,
    k: f64,
    grid: &TimeGrid,
) -> Result<GradientEvaluation> {
    let fwd = integrate_regularized(problem, control, k, grid, false)?;
    let objective = evaluate_objective(problem, &fwd, control);
    let adj = solve_discrete_adjoint(problem, &fwd, control, Some(k), grid)?;
    let gradient = gradient_from_adjoint(problem, &fwd, &adj, control);
    Ok(GradientEvaluation { gradient, objective, fwd, adj })
}

/// `|| u - P(u - g) ||_inf` for the box `[lo, hi]`.
pub fn projected_gradient_norm(control: &Trajectory, gradient: &Trajectory, lo: &[f64], hi: &[f64]) -> f64 {
    let m = control.dim();
    control
        .values()
        .iter()
        .zip(gradient.values())
        .enumerate()
        .map(|(idx, (&u, &g))| {
            let c = idx % m;
            (u - (u - g).clamp(lo[c], hi[c])).abs()
        })
        .fold(0.0, f64::max)
}

/// Projected-gradient stationarity of `control`; zero exactly at discrete KKT points.
pub fn optimality_residual(problem: &dyn ProblemDefinition, control: &Trajectory, k: f64, grid: &TimeGrid) -> Result<f64> {
    let eval = reduced_gradient(problem, control, k, grid)?;
    let (lo, hi) = problem.control_bounds();
    Ok(projected_gradient_norm(control, &eval.gradient, lo, hi))
}

fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Argmax node of one step's window and whether it is unique.
type WindowArgmax = (isize, bool);
/// `(node, first step, last step)` of a persistent strict maximum.
type PersistentMax = (usize, usize, usize);

/// Hard-window argmax of component `c` for every step, with a flag telling
/// whether the maximum is unique within `1e-9 (1 + |max|)`. Indices are forward nodes
/// (negative for history).
fn window_argmax(state: &Trajectory, c: usize, grid: &TimeGrid) -> Vec<WindowArgmax> {
    let (nh, nf) = (grid.n_hist(), grid.n_fwd());
    let n = state.dim();
    let mut deque = SlidingMax::with_capacity(nh);
    let mut pushed = 0;
    let mut out = Vec::with_capacity(nf);
    let sample = |node: usize| state.values()[node * n + c];
    for j in 0..nf {
        while pushed < j + nh {
            deque.push(pushed, sample(pushed));
            pushed += 1;
        }
        deque.expire(j);
        let (idx, max) = deque.max().expect("window is non-empty");
        let tol = 1e-9 * (1.0 + max.abs());
        let unique = (j..j + nh).all(|node| node == idx || sample(node) < max - tol);
        out.push((idx as isize - nh as isize, unique));
    }
    out
}

/// Nodes whose window maximum is unique for at least two consecutive steps:
/// strict maxima that persist in the window, as opposed to the moving newest or
/// oldest sample of a monotone stretch. Returns `(node, first step, last step)`.
fn persistent_maxima(argmax: &[WindowArgmax]) -> Vec<PersistentMax> {
    let mut out: Vec<(usize, usize, usize)> = Vec::new();
    for (step, &(idx, unique)) in argmax.iter().enumerate() {
        if !unique || idx < 0 {
            continue;
        }
        let node = idx as usize;
        match out.last_mut() {
            Some(last) if last.0 == node && last.2 + 1 == step => last.2 = step,
            _ => out.push((node, step, step)),
        }
    }
    out.retain(|&(_, first, last)| last > first);
    out
}

/// Least-squares line through `(i, y_i)`, evaluated at `at`.
fn line_fit(nodes: &[usize], y: impl Fn(usize) -> f64) -> impl Fn(f64) -> f64 {
    let len = nodes.len() as f64;
    let mx = nodes.iter().map(|&i| i as f64).sum::<f64>() / len;
    let my = nodes.iter().map(|&i| y(i)).sum::<f64>() / len;
    let sxx: f64 = nodes.iter().map(|&i| (i as f64 - mx).powi(2)).sum();
    let sxy: f64 = nodes.iter().map(|&i| (i as f64 - mx) * (y(i) - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    move |at: f64| my + slope * (at - mx)
}

/// Adjoint jumps at strict maxima of the state.
///
/// Spikes are nodes where `|d lambda|` exceeds `spike_threshold` times its
/// median (node 0 excluded); a spike cluster is the surrounding run above
/// `CLUSTER_EDGE_FACTOR` times the median. A cluster is reported only if it
/// lies next to a persistent strict window maximum `s0` of the state; other
/// steep stretches of lambda are continuous and are skipped.
///
/// The magnitude is `lambda(b + 1) - lambda(a)` over the core `[a, b]` of nodes with
/// `x(s0) - x_i <= CORE_CUT / k`, minus the smooth part of `d lambda`,
/// extrapolated linearly from flanks of the core's width on either side.
/// The prediction is `-sum dt lambda_{j+1}^T F_y(j) e_c` over the steps `j`
/// whose window maximum sits uniquely at `s0`.
pub fn detect_jumps(
    adj: &AdjointOutput,
    fwd: &ForwardSolveOutput,
    control: &Trajectory,
    problem: &dyn ProblemDefinition,
    grid: &TimeGrid,
    spike_threshold: f64,
) -> Vec<JumpRecord> {
    let n = problem.state_dim();
    let (nh, nf, dt) = (grid.n_hist(), grid.n_fwd(), grid.dt());
    let mut records = Vec::new();
    if nf < 4 {
        return records;
    }
    let edge = CLUSTER_EDGE_FACTOR.min(spike_threshold);
    let mut jac = StepJacobians::new(n);

    for c in 0..n {
        let d: Vec<f64> = (0..nf).map(|j| adj.dlambda.node(j)[c].abs()).collect();
        let med = median(d[1..].to_vec());
        let (hi, lo) = (spike_threshold * med, edge * med);
        let x = |i: usize| fwd.state.node(nh + i)[c];
        let lam = |i: usize| adj.lambda.node(i)[c];
        let slope = |i: usize| adj.dlambda.node(i)[c];

        let mut maxima: Option<(Vec<WindowArgmax>, Vec<PersistentMax>)> = None;
        let mut j = 1;
        while j < nf {
            if d[j] <= lo {
                j += 1;
                continue;
            }
            let a = j;
            while j < nf && d[j] > lo {
                j += 1;
            }
            let b = j - 1;
            let Some(peak) = (a..=b).filter(|&i| d[i] > hi).max_by(|&p, &q| d[p].total_cmp(&d[q])) else {
                continue;
            };

            let (argmax, persistent) = maxima.get_or_insert_with(|| {
                let am = window_argmax(&fwd.state, c, grid);
                let pm = persistent_maxima(&am);
                (am, pm)
            });
            let reach = b - a + 3;
            let Some(&(s0, _, _)) = persistent
                .iter()
                .filter(|&&(node, _, _)| node + reach >= a && node <= b + reach)
                .min_by_key(|&&(node, _, _)| node.abs_diff(peak))
            else {
                continue;
            };

            // core of the smoothing mass around s0
            let cut = match fwd.mode.sharpness() {
                Some(k) => CORE_CUT / k,
                None => 0.0,
            };
            let (mut ca, mut cb) = (s0.max(1), s0.min(nf - 1));
            while ca > 1 && x(s0) - x(ca - 1) <= cut {
                ca -= 1;
            }
            while cb + 1 < nf && x(s0) - x(cb + 1) <= cut {
                cb += 1;
            }
            let width = (cb - ca + 1).max(MIN_FLANK);
            let left: Vec<usize> = (ca.saturating_sub(width).max(1)..ca).collect();
            let right: Vec<usize> = (cb + 1..(cb + 1 + width).min(nf)).collect();
            let (left, right) = match (left.is_empty(), right.is_empty()) {
                (true, false) => (right.clone(), right),
                (false, true) => (left.clone(), left),
                _ => (left, right),
            };
            let smooth = if left.is_empty() {
                0.0
            } else {
                let fl = line_fit(&left, slope);
                let fr = line_fit(&right, slope);
                (ca..=cb).map(|i| if i < s0 { fl(i as f64) } else { fr(i as f64) }).sum::<f64>()
            };
            let magnitude = (lam(cb + 1) - lam(ca)) - dt * smooth;

            let mut predicted = 0.0;
            let mut interval: Option<(usize, usize)> = None;
            for (step, &(idx, unique)) in argmax.iter().enumerate() {
                if idx != s0 as isize || !unique {
                    continue;
                }
                jac.eval(problem, fwd.state.node(nh + step), fwd.aux_v.node(step), control.node(step));
                let next = adj.lambda.node(step + 1);
                predicted -= dt * (0..n).map(|r| next[r] * jac.fy[r * n + c]).sum::<f64>();
                interval = Some(interval.map_or((step, step), |(s, _)| (s, step)));
            }

            records.push(JumpRecord {
                component: c,
                time: grid.forward_time(s0),
                magnitude,
                predicted,
                argmax_interval: interval.map(|(s, e)| (grid.forward_time(s), grid.forward_time(e))),
                cluster: (a, b),
                core: (ca, cb),
            });
        }
    }
    records
}
