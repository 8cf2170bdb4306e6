//! Control problems with running-maximum coupling and the built-in registry.
//!
//! A problem supplies the pieces of
//!
//! ```text
//! x'(t) = F0(x(t), v(t)) + F1(x(t), v(t)) u(t),   v(t) = max_{s in [t-tau, t]} x(s)
//! J     = int_0^T j(t, x(t), u(t)) dt + g(x(T))
//! ```
//!
//! together with the Jacobians the adjoint needs. Solvers only ever combine
//! `F0` and `F1` in the control-affine form above.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Matrices are passed as row-major slices: `n x n` for state Jacobians and
/// `n x m` for the input matrix.
pub trait ProblemDefinition: Send + Sync {
    fn name(&self) -> &str;

    /// State dimension `n`.
    fn state_dim(&self) -> usize;

    /// Control dimension `m`.
    fn control_dim(&self) -> usize;

    /// Window length `tau` of the running maximum.
    fn tau(&self) -> f64;

    /// Final time `T`.
    fn horizon(&self) -> f64;

    /// History `phi(t)` for `t` in `[-tau, 0]`.
    fn history(&self, t: f64, out: &mut [f64]);

    fn drift(&self, x: &[f64], v: &[f64], out: &mut [f64]);
    fn drift_jac_x(&self, x: &[f64], v: &[f64], out: &mut [f64]);
    fn drift_jac_y(&self, x: &[f64], v: &[f64], out: &mut [f64]);

    /// Input matrix `F1(x, v)`.
    fn input_matrix(&self, x: &[f64], v: &[f64], out: &mut [f64]);
    /// `d/dx (F1(x, v) u)`.
    fn input_jac_x(&self, x: &[f64], v: &[f64], u: &[f64], out: &mut [f64]);
    /// `d/dv (F1(x, v) u)`.
    fn input_jac_y(&self, x: &[f64], v: &[f64], u: &[f64], out: &mut [f64]);

    fn running_cost(&self, t: f64, x: &[f64], u: &[f64]) -> f64;
    fn running_cost_x(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]);
    fn running_cost_u(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]);

    /// Mayer term `g(x(T))`; zero unless overridden.
    fn terminal_cost(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn terminal_cost_grad(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn has_terminal_cost(&self) -> bool {
        false
    }

    /// Componentwise box `U = [lo, hi]`.
    fn control_bounds(&self) -> (&[f64], &[f64]);
}

/// Scratch buffers for evaluating the control-affine right-hand side.
#[derive(Debug, Clone)]
pub(crate) struct RhsScratch {
    f0: Vec<f64>,
    f1: Vec<f64>,
}

impl RhsScratch {
    pub(crate) fn new(n: usize, m: usize) -> Self {
        Self { f0: vec![0.0; n], f1: vec![0.0; n * m] }
    }
}

/// `F0(x, v) + F1(x, v) u`.
pub(crate) fn affine_rhs(
    problem: &dyn ProblemDefinition,
    x: &[f64],
    v: &[f64],
    u: &[f64],
    scratch: &mut RhsScratch,
    out: &mut [f64],
) {
    let m = u.len();
    problem.drift(x, v, &mut scratch.f0);
    problem.input_matrix(x, v, &mut scratch.f1);
    for (r, o) in out.iter_mut().enumerate() {
        let row = &scratch.f1[r * m..(r + 1) * m];
        *o = scratch.f0[r] + row.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Checks that a control box is non-empty.
pub fn validate_bounds(lo: &[f64], hi: &[f64]) -> Result<()> {
    if lo.len() != hi.len() {
        return Err(Error::DimensionMismatch(format!("bounds of length {} and {}", lo.len(), hi.len())));
    }
    for (component, (&l, &h)) in lo.iter().zip(hi).enumerate() {
        if !(l <= h) || !l.is_finite() || !h.is_finite() {
            return Err(Error::BadBounds { component, lo: l, hi: h });
        }
    }
    Ok(())
}

/// Desired state of the tracking problem: two triangles on `[0, 3]`.
pub fn desired_state(t: f64) -> Result<f64> {
    if !(0.0..=3.0).contains(&t) {
        return Err(Error::OutOfDomain { t, lo: 0.0, hi: 3.0 });
    }
    Ok(desired_state_unchecked(t))
}

fn desired_state_unchecked(t: f64) -> f64 {
    if t <= 1.0 {
        0.5 - (t - 0.5).abs()
    } else if t < 2.0 {
        0.0
    } else {
        (t - 2.5).abs() - 0.5
    }
}

/// Tracking problem
/// `min alpha/2 |x - x_d|^2 + beta/2 |u|^2` s.t. `x' = x - 2 max x_t + u`, `phi = 0`.
#[derive(Debug, Clone)]
pub struct Fig1Tracking {
    pub alpha: f64,
    pub beta: f64,
    tau: f64,
    horizon: f64,
    lo: [f64; 1],
    hi: [f64; 1],
}

impl Fig1Tracking {
    pub const DEFAULT_ALPHA: f64 = 100.0;
    pub const DEFAULT_BETA: f64 = 0.1;
    pub const DEFAULT_TAU: f64 = 0.2;
    pub const DEFAULT_HORIZON: f64 = 3.0;
    pub const DEFAULT_BOUND: f64 = 5.0;

    pub fn new(alpha: f64, beta: f64, tau: f64, horizon: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidProblem(format!("weights must be non-negative, got alpha={alpha}, beta={beta}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidProblem(format!("tau must be positive, got {tau}")));
        }
        if !(horizon > 0.0 && horizon <= 3.0) {
            return Err(Error::InvalidProblem(format!(
                "horizon must lie in (0, 3] where the desired state is defined, got {horizon}"
            )));
        }
        validate_bounds(&[lo], &[hi])?;
        Ok(Self { alpha, beta, tau, horizon, lo: [lo], hi: [hi] })
    }
}

impl Default for Fig1Tracking {
    fn default() -> Self {
        Self::new(
            Self::DEFAULT_ALPHA,
            Self::DEFAULT_BETA,
            Self::DEFAULT_TAU,
            Self::DEFAULT_HORIZON,
            -Self::DEFAULT_BOUND,
            Self::DEFAULT_BOUND,
        )
        .expect("default parameters are valid")
    }
}

impl ProblemDefinition for Fig1Tracking {
    fn name(&self) -> &str {
        "fig1_tracking"
    }
    fn state_dim(&self) -> usize {
        1
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn tau(&self) -> f64 {
        self.tau
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn history(&self, _t: f64, out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn drift(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        out[0] = x[0] - 2.0 * v[0];
    }
    fn drift_jac_x(&self, _x: &[f64], _v: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }
    fn drift_jac_y(&self, _x: &[f64], _v: &[f64], out: &mut [f64]) {
        out[0] = -2.0;
    }
    fn input_matrix(&self, _x: &[f64], _v: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }
    fn input_jac_x(&self, _x: &[f64], _v: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn input_jac_y(&self, _x: &[f64], _v: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn running_cost(&self, t: f64, x: &[f64], u: &[f64]) -> f64 {
        let e = x[0] - desired_state_unchecked(t);
        0.5 * self.alpha * e * e + 0.5 * self.beta * u[0] * u[0]
    }
    fn running_cost_x(&self, t: f64, x: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = self.alpha * (x[0] - desired_state_unchecked(t));
    }
    fn running_cost_u(&self, _t: f64, _x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = self.beta * u[0];
    }
    fn control_bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }
}

/// Scalar linear-quadratic problem with a running-maximum coupling:
///
/// ```text
/// x' = a x + b v + c u,   x = h on [-tau, 0]
/// j  = (wx / 2) (x - target(t))^2 + (wu / 2) u^2,   g = (wt / 2) x^2
/// ```
#[derive(Debug, Clone)]
pub struct ScalarLinear {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub h: f64,
    pub wx: f64,
    pub wu: f64,
    pub wt: f64,
    pub target: fn(f64) -> f64,
    tau: f64,
    horizon: f64,
    lo: [f64; 1],
    hi: [f64; 1],
}

impl ScalarLinear {
    /// Zero dynamics and costs; set the public fields as needed.
    pub fn new(tau: f64, horizon: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite() && horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidProblem(format!("tau={tau}, T={horizon} must be positive")));
        }
        validate_bounds(&[lo], &[hi])?;
        Ok(Self {
            a: 0.0,
            b: 0.0,
            c: 0.0,
            h: 0.0,
            wx: 0.0,
            wu: 0.0,
            wt: 0.0,
            target: |_| 0.0,
            tau,
            horizon,
            lo: [lo],
            hi: [hi],
        })
    }
}

impl ProblemDefinition for ScalarLinear {
    fn name(&self) -> &str {
        "scalar_linear"
    }
    fn state_dim(&self) -> usize {
        1
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn tau(&self) -> f64 {
        self.tau
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn history(&self, _t: f64, out: &mut [f64]) {
        out[0] = self.h;
    }
    fn drift(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        out[0] = self.a * x[0] + self.b * v[0];
    }
    fn drift_jac_x(&self, _x: &[f64], _v: &[f64], out: &mut [f64]) {
        out[0] = self.a;
    }
    fn drift_jac_y(&self, _x: &[f64], _v: &[f64], out: &mut [f64]) {
        out[0] = self.b;
    }
    fn input_matrix(&self, _x: &[f64], _v: &[f64], out: &mut [f64]) {
        out[0] = self.c;
    }
    fn input_jac_x(&self, _x: &[f64], _v: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn input_jac_y(&self, _x: &[f64], _v: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn running_cost(&self, t: f64, x: &[f64], u: &[f64]) -> f64 {
        let e = x[0] - (self.target)(t);
        0.5 * self.wx * e * e + 0.5 * self.wu * u[0] * u[0]
    }
    fn running_cost_x(&self, t: f64, x: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = self.wx * (x[0] - (self.target)(t));
    }
    fn running_cost_u(&self, _t: f64, _x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = self.wu * u[0];
    }
    fn terminal_cost(&self, x: &[f64]) -> f64 {
        0.5 * self.wt * x[0] * x[0]
    }
    fn terminal_cost_grad(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.wt * x[0];
    }
    fn has_terminal_cost(&self) -> bool {
        self.wt != 0.0
    }
    fn control_bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }
}

/// Problem without an optimal control, in its simplified form `x' = |u|`.
///
/// The scalar control `u` in `[lo, hi]` (with `lo <= 0 <= hi`) is split into
/// `u = u_plus - u_minus`, so that `|u| = u_plus + u_minus` enters the dynamics
/// linearly. [`NonexistenceDemo::lift`] maps a scalar control onto this pair.
#[derive(Debug, Clone)]
pub struct NonexistenceDemo {
    tau: f64,
    horizon: f64,
    lo: [f64; 2],
    hi: [f64; 2],
}

impl NonexistenceDemo {
    pub const DEFAULT_TAU: f64 = 2.0;
    pub const DEFAULT_HORIZON: f64 = 1.0;
    pub const DEFAULT_LO: f64 = -1.0;
    pub const DEFAULT_HI: f64 = 3.0;
    /// Weight of the terminal term `|x(1) - 2|`.
    pub const TERMINAL_WEIGHT: f64 = 4.0;

    pub fn new(tau: f64, horizon: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite() && horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidProblem(format!("tau={tau}, T={horizon} must be positive")));
        }
        if !(lo <= 0.0 && 0.0 <= hi) {
            return Err(Error::InvalidProblem(format!("control box [{lo}, {hi}] must contain 0")));
        }
        validate_bounds(&[lo], &[hi])?;
        Ok(Self { tau, horizon, lo: [0.0, 0.0], hi: [hi, -lo] })
    }

    /// Splits a scalar control into `(max(u, 0), max(-u, 0))`.
    pub fn lift(u: f64) -> [f64; 2] {
        [u.max(0.0), (-u).max(0.0)]
    }
}

impl Default for NonexistenceDemo {
    fn default() -> Self {
        Self::new(Self::DEFAULT_TAU, Self::DEFAULT_HORIZON, Self::DEFAULT_LO, Self::DEFAULT_HI)
            .expect("default parameters are valid")
    }
}

impl ProblemDefinition for NonexistenceDemo {
    fn name(&self) -> &str {
        "nonexistence_demo"
    }
    fn state_dim(&self) -> usize {
        1
    }
    fn control_dim(&self) -> usize {
        2
    }
    fn tau(&self) -> f64 {
        self.tau
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    // Ranges over [-10, 10] on both [-2, -1] and [-1, 0], with phi(0) = 0.
    fn history(&self, t: f64, out: &mut [f64]) {
        out[0] = 10.0 * (2.0 * std::f64::consts::PI * t).sin();
    }
    fn drift(&self, _x: &[f64], _v: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn drift_jac_x(&self, _x: &[f64], _v: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn drift_jac_y(&self, _x: &[f64], _v: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn input_matrix(&self, _x: &[f64], _v: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        out[1] = 1.0;
    }
    fn input_jac_x(&self, _x: &[f64], _v: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn input_jac_y(&self, _x: &[f64], _v: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn running_cost(&self, t: f64, x: &[f64], u: &[f64]) -> f64 {
        let e = x[0] - 2.0 * t;
        e * e + u[0] - u[1]
    }
    fn running_cost_x(&self, t: f64, x: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * (x[0] - 2.0 * t);
    }
    fn running_cost_u(&self, _t: f64, _x: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        out[1] = -1.0;
    }
    fn terminal_cost(&self, x: &[f64]) -> f64 {
        Self::TERMINAL_WEIGHT * (x[0] - 2.0).abs()
    }
    fn terminal_cost_grad(&self, x: &[f64], out: &mut [f64]) {
        let d = x[0] - 2.0;
        out[0] = if d == 0.0 { 0.0 } else { Self::TERMINAL_WEIGHT * d.signum() };
    }
    fn has_terminal_cost(&self) -> bool {
        true
    }
    fn control_bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Fig1Tracking,
    NonexistenceDemo,
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fig1_tracking" | "fig1" => Ok(Self::Fig1Tracking),
            "nonexistence_demo" | "nonexistence" => Ok(Self::NonexistenceDemo),
            other => Err(Error::UnknownProblem(other.to_string())),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fig1Tracking => "fig1_tracking",
            Self::NonexistenceDemo => "nonexistence_demo",
        })
    }
}

/// Parameter overrides; `None` keeps the registry default.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProblemOverrides {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub tau: Option<f64>,
    pub horizon: Option<f64>,
    pub u_lo: Option<f64>,
    pub u_hi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemId {
    pub kind: ProblemKind,
    pub overrides: ProblemOverrides,
}

impl ProblemId {
    pub fn new(kind: ProblemKind) -> Self {
        Self { kind, overrides: ProblemOverrides::default() }
    }

    pub fn with_overrides(kind: ProblemKind, overrides: ProblemOverrides) -> Self {
        Self { kind, overrides }
    }
}

pub fn build_problem(id: &ProblemId) -> Result<Box<dyn ProblemDefinition>> {
    let o = &id.overrides;
    match id.kind {
        ProblemKind::Fig1Tracking => {
            Ok(Box::new(Fig1Tracking::new(
                o.alpha.unwrap_or(Fig1Tracking::DEFAULT_ALPHA),
                o.beta.unwrap_or(Fig1Tracking::DEFAULT_BETA),
                o.tau.unwrap_or(Fig1Tracking::DEFAULT_TAU),
                o.horizon.unwrap_or(Fig1Tracking::DEFAULT_HORIZON),
                o.u_lo.unwrap_or(-Fig1Tracking::DEFAULT_BOUND),
                o.u_hi.unwrap_or(Fig1Tracking::DEFAULT_BOUND),
            )?))
        }
        ProblemKind::NonexistenceDemo => {
            if o.alpha.is_some() || o.beta.is_some() {
                return Err(Error::InvalidProblem("nonexistence_demo has no alpha/beta weights".into()));
            }
            Ok(Box::new(NonexistenceDemo::new(
                o.tau.unwrap_or(NonexistenceDemo::DEFAULT_TAU),
                o.horizon.unwrap_or(NonexistenceDemo::DEFAULT_HORIZON),
                o.u_lo.unwrap_or(NonexistenceDemo::DEFAULT_LO),
                o.u_hi.unwrap_or(NonexistenceDemo::DEFAULT_HI),
            )?))
        }
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Largest relative mismatch between the supplied Jacobians and central
/// differences with step `h`, over `draws` random points in `[-10, 10]`.
pub fn jacobian_consistency(problem: &dyn ProblemDefinition, draws: usize, h: f64, seed: u64) -> f64 {
    let n = problem.state_dim();
    let m = problem.control_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = problem.horizon();
    let mut worst: f64 = 0.0;

    let mut jac = vec![0.0; n * n];
    let mut input = vec![0.0; n * n];
    let mut f1 = vec![0.0; n * m];
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    let mut scratch = RhsScratch::new(n, m);
    let mut grad_x = vec![0.0; n];
    let mut grad_u = vec![0.0; m];

    for _ in 0..draws {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let u: Vec<f64> = (0..m).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let t = rng.gen_range(0.0..horizon);

        // d/dx and d/dv of the full right-hand side, column by column.
        for wrt_v in [false, true] {
            if wrt_v {
                problem.drift_jac_y(&x, &v, &mut jac);
                problem.input_jac_y(&x, &v, &u, &mut input);
            } else {
                problem.drift_jac_x(&x, &v, &mut jac);
                problem.input_jac_x(&x, &v, &u, &mut input);
            }
            for c in 0..n {
                let (mut xp, mut xm, mut vp, mut vm) = (x.clone(), x.clone(), v.clone(), v.clone());
                if wrt_v {
                    vp[c] += h;
                    vm[c] -= h;
                } else {
                    xp[c] += h;
                    xm[c] -= h;
                }
                affine_rhs(problem, &xp, &vp, &u, &mut scratch, &mut plus);
                affine_rhs(problem, &xm, &vm, &u, &mut scratch, &mut minus);
                for r in 0..n {
                    let fd = (plus[r] - minus[r]) / (2.0 * h);
                    worst = worst.max(rel_err(jac[r * n + c] + input[r * n + c], fd));
                }
            }
        }

        // F1 against differences in u.
        problem.input_matrix(&x, &v, &mut f1);
        for c in 0..m {
            let (mut up, mut um) = (u.clone(), u.clone());
            up[c] += h;
            um[c] -= h;
            affine_rhs(problem, &x, &v, &up, &mut scratch, &mut plus);
            affine_rhs(problem, &x, &v, &um, &mut scratch, &mut minus);
            for r in 0..n {
                let fd = (plus[r] - minus[r]) / (2.0 * h);
                worst = worst.max(rel_err(f1[r * m + c], fd));
            }
        }

        // Running-cost partials.
        problem.running_cost_x(t, &x, &u, &mut grad_x);
        for c in 0..n {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[c] += h;
            xm[c] -= h;
            let fd = (problem.running_cost(t, &xp, &u) - problem.running_cost(t, &xm, &u)) / (2.0 * h);
            worst = worst.max(rel_err(grad_x[c], fd));
        }
        problem.running_cost_u(t, &x, &u, &mut grad_u);
        for c in 0..m {
            let (mut up, mut um) = (u.clone(), u.clone());
            up[c] += h;
            um[c] -= h;
            let fd = (problem.running_cost(t, &x, &up) - problem.running_cost(t, &x, &um)) / (2.0 * h);
            worst = worst.max(rel_err(grad_u[c], fd));
        }

        if problem.has_terminal_cost() {
            problem.terminal_cost_grad(&x, &mut grad_x);
            for c in 0..n {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[c] += h;
                xm[c] -= h;
                let fd = (problem.terminal_cost(&xp) - problem.terminal_cost(&xm)) / (2.0 * h);
                worst = worst.max(rel_err(grad_x[c], fd));
            }
        }
    }
    worst
}
