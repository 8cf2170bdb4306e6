//! Optimal control of ODEs driven by the running maximum of their state over a
//! trailing window.
//!
//! The hard maximum is replaced by a LogIntExp smoothing with sharpness `k`;
//! the smoothed problem is discretized with explicit Euler, differentiated
//! with its exact discrete adjoint, and minimized by projected gradient with
//! Armijo backtracking over a control box.

pub mod adjoint;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod optimizer;
pub mod problem;
pub mod smoothmax;
pub mod window;

pub use adjoint::{
    detect_jumps, gradient_from_adjoint, optimality_residual, projected_gradient_norm, reduced_gradient,
    solve_discrete_adjoint, AdjointOutput, GradientEvaluation, JumpRecord,
};
pub use dynamics::{
    evaluate_objective, integral_residual, integrate, integrate_hardmax, integrate_regularized, picard_solve,
    problem_grid, ForwardSolveOutput, MaxMode, PicardOutcome,
};
pub use error::{Error, Result};
pub use grid::{Span, TimeGrid, Trajectory};
pub use optimizer::{project_box, projected_gradient, InitialStep, OptimizerConfig, SolveReport, Termination};
pub use problem::{
    build_problem, desired_state, Fig1Tracking, NonexistenceDemo, ProblemDefinition, ProblemId, ProblemKind,
    ProblemOverrides, ScalarLinear,
};
pub use smoothmax::{lie_vector_window, lie_window, lse, SmoothMaxResult};

/// Uniform grid on `[-tau, T]` with step `dt`.
pub fn make_grid(tau: f64, horizon: f64, dt: f64) -> Result<TimeGrid> {
    TimeGrid::new(tau, horizon, dt)
}
