//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use supctrl_core::problem::ProblemDefinition;
use supctrl_core::{integrate_hardmax, ForwardSolveOutput, ScalarLinear, TimeGrid, Trajectory};

/// Smoothing weights of step `j` recomputed from the state: density over the
/// window nodes `j - N .. j - 1` (forward indices, negative for history).
pub fn direct_weights(state: &Trajectory, grid: &TimeGrid, j: usize, k: f64) -> Vec<f64> {
    let nh = grid.n_hist();
    let window: Vec<f64> = (j..j + nh).map(|node| state.node(node)[0]).collect();
    let max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = window.iter().map(|x| (k * (x - max)).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / (grid.dt() * total)).collect()
}

/// Adjoint of a scalar-state problem from the transposed linearization of the
/// whole Euler recursion: with `M` the Jacobian of `(x_1 .. x_nf)` on
/// `(x_0 .. x_nf)`, solves `lambda_i - sum_r M[r][i] lambda_r = -dt j_x(i)` and
/// `lambda_nf = -g'(x_nf)` as one dense system.
pub fn dense_adjoint(problem: &dyn ProblemDefinition, fwd: &ForwardSolveOutput, control: &Trajectory, k: f64) -> Vec<f64> {
    assert_eq!(problem.state_dim(), 1);
    let grid = *control.grid();
    let (nh, nf, dt) = (grid.n_hist(), grid.n_fwd(), grid.dt());
    let size = nf + 1;
    // m[(r, i)] = d x_r / d x_i for one step
    let mut m = DMatrix::<f64>::zeros(size, size);
    let (mut fx, mut fy, mut gx, mut gy) = ([0.0], [0.0], [0.0], [0.0]);
    for j in 0..nf {
        let x = fwd.state.node(nh + j);
        let v = fwd.aux_v.node(j);
        let u = control.node(j);
        problem.drift_jac_x(x, v, &mut fx);
        problem.drift_jac_y(x, v, &mut fy);
        problem.input_jac_x(x, v, u, &mut gx);
        problem.input_jac_y(x, v, u, &mut gy);
        m[(j + 1, j)] += 1.0 + dt * (fx[0] + gx[0]);
        let w = direct_weights(&fwd.state, &grid, j, k);
        for (s, weight) in w.iter().enumerate() {
            let node = j + s;
            if node >= nh {
                m[(j + 1, node - nh)] += dt * (fy[0] + gy[0]) * weight * dt;
            }
        }
    }
    let mut a = DMatrix::<f64>::identity(size, size) - m.transpose();
    let mut rhs = DVector::<f64>::zeros(size);
    let mut jx = [0.0];
    for i in 0..nf {
        problem.running_cost_x(grid.forward_time(i), fwd.state.node(nh + i), control.node(i), &mut jx);
        rhs[i] = -dt * jx[0];
    }
    // terminal row: lambda_nf = -g'
    for c in 0..size {
        a[(nf, c)] = if c == nf { 1.0 } else { 0.0 };
    }
    if problem.has_terminal_cost() {
        problem.terminal_cost_grad(fwd.state.node(nh + nf), &mut jx);
        rhs[nf] = -jx[0];
    }
    a.lu().solve(&rhs).expect("unit lower-triangular system").iter().copied().collect()
}

/// Random instance of the max-Gronwall hypothesis: a nonnegative, nondecreasing
/// Euler state with zero history and
/// `x(t) <= k1 + k2 int_0^t (x(s) + max_{[s - tau, s]} x) ds`.
/// Returns `(k1, k2, grid, state)`.
pub fn gronwall_instance(rng: &mut impl Rng) -> (f64, f64, TimeGrid, Trajectory) {
    let dt = 1e-3;
    let tau = dt * rng.gen_range(1..400) as f64;
    let horizon = dt * rng.gen_range(200..2000) as f64;
    let k1 = rng.gen_range(0.05..5.0);
    let k2 = rng.gen_range(0.05..2.0);
    let mut p = ScalarLinear::new(tau, horizon, 0.0, 1e6).unwrap();
    p.a = k2 * rng.gen_range(0.0..1.0);
    p.b = k2 * rng.gen_range(0.0..1.0);
    p.c = 1.0;
    let grid = supctrl_core::make_grid(tau, horizon, dt).unwrap();
    // nonnegative forcing with total mass at most k1
    let raw: Vec<f64> = (0..=grid.n_fwd()).map(|_| rng.gen_range(0.0f64..1.0).powi(3)).collect();
    let mass = dt * raw[..grid.n_fwd()].iter().sum::<f64>();
    let scale = k1 * rng.gen_range(0.0..1.0) / mass.max(f64::MIN_POSITIVE);
    let u = Trajectory::from_values(grid, 1, supctrl_core::Span::Forward, raw.iter().map(|r| r * scale).collect()).unwrap();
    let state = integrate_hardmax(&p, &u, &grid).unwrap().state;
    (k1, k2, grid, state)
}

/// Whether `residuals[i - 1] <= K (2L)^(i-1) T^i / i!` for all `i`, with `K`
/// fitted to the first entry.
pub fn within_factorial_envelope(residuals: &[f64], lipschitz: f64, horizon: f64) -> bool {
    let Some(&first) = residuals.first() else { return true };
    let big_k = first / horizon;
    let mut bound = big_k * horizon;
    residuals.iter().enumerate().all(|(idx, &r)| {
        if idx > 0 {
            let i = (idx + 1) as f64;
            bound *= 2.0 * lipschitz * horizon / i;
        }
        r <= bound * (1.0 + 1e-12) + 1e-300
    })
}

/// Minimizer of `dt sum_{j < nf} [alpha/2 (x_j - d_j)^2 + beta/2 u_j^2]` with
/// `x_0 = 0`, `x_{j+1} = x_j + dt u_j`, from the normal equations.
pub fn dense_tracking_control(grid: &TimeGrid, alpha: f64, beta: f64, target: impl Fn(f64) -> f64) -> Vec<f64> {
    let (nf, dt) = (grid.n_fwd(), grid.dt());
    // x = L u over nodes 0..nf-1
    let l = DMatrix::<f64>::from_fn(nf, nf, |j, i| if i < j { dt } else { 0.0 });
    let d = DVector::<f64>::from_fn(nf, |j, _| target(grid.forward_time(j)));
    let a = l.transpose() * &l * alpha + DMatrix::<f64>::identity(nf, nf) * beta;
    let b = l.transpose() * d * alpha;
    a.cholesky().expect("positive definite").solve(&b).iter().copied().collect()
}
