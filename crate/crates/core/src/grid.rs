//! Uniform time grids on `[-tau, T]` and grid-sampled trajectories.

use crate::error::{Error, Result};

const TILING_RTOL: f64 = 1e-12;

/// Uniform discretization of `[-tau, T]`.
///
/// Node `i` sits at `-tau + i * dt`; node `n_hist` is `t = 0` and the last
/// node `n_hist + n_fwd` is `t = T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    tau: f64,
    horizon: f64,
    dt: f64,
    n_hist: usize,
    n_fwd: usize,
}

fn tile_count(length: f64, dt: f64) -> Result<usize> {
    let ratio = length / dt;
    let n = ratio.round();
    if n < 1.0 || ((n * dt - length).abs() > TILING_RTOL * length) {
        return Err(Error::NonCommensurateStep { dt, length, ratio });
    }
    Ok(n as usize)
}

impl TimeGrid {
    pub fn new(tau: f64, horizon: f64, dt: f64) -> Result<Self> {
        for (name, value) in [("tau", tau), ("T", horizon), ("dt", dt)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidGrid(format!("{name} must be positive and finite, got {value}")));
            }
        }
        let n_hist = tile_count(tau, dt)?;
        let n_fwd = tile_count(horizon, dt)?;
        Ok(Self { tau, horizon, dt, n_hist, n_fwd })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of history steps, `tau / dt`. Also the smoothing window length.
    pub fn n_hist(&self) -> usize {
        self.n_hist
    }

    /// Number of forward steps, `T / dt`.
    pub fn n_fwd(&self) -> usize {
        self.n_fwd
    }

    pub fn node_count(&self) -> usize {
        self.n_hist + self.n_fwd + 1
    }

    /// Time of full-grid node `i`.
    pub fn time(&self, i: usize) -> f64 {
        (i as f64 - self.n_hist as f64) * self.dt
    }

    /// Time of forward node `j` (node `n_hist + j` of the full grid).
    pub fn forward_time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    /// Full-grid node index of `t`, if `t` lies on the grid.
    pub fn index(&self, t: f64) -> Option<usize> {
        let r = t / self.dt + self.n_hist as f64;
        let i = r.round();
        if i < 0.0 || i as usize >= self.node_count() {
            return None;
        }
        let i = i as usize;
        ((self.time(i) - t).abs() <= 1e-9 * self.dt).then_some(i)
    }

    /// Full-grid node index of the forward node `j`.
    pub fn full_index(&self, j: usize) -> usize {
        self.n_hist + j
    }

    /// Same grid with the step halved.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.tau, self.horizon, self.dt / 2.0)
    }
}

/// Which part of the grid a trajectory covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Span {
    /// `[-tau, T]`
    Full,
    /// `[0, T]`
    Forward,
}

/// Vector-valued function sampled at grid nodes, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    dim: usize,
    span: Span,
    values: Vec<f64>,
}

impl Trajectory {
    pub fn zeros(grid: TimeGrid, dim: usize, span: Span) -> Self {
        let len = Self::span_nodes(&grid, span) * dim;
        Self { grid, dim, span, values: vec![0.0; len] }
    }

    pub fn from_values(grid: TimeGrid, dim: usize, span: Span, values: Vec<f64>) -> Result<Self> {
        let expected = Self::span_nodes(&grid, span) * dim;
        if values.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "trajectory needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let node = pos / dim.max(1);
            let t = match span {
                Span::Full => grid.time(node),
                Span::Forward => grid.forward_time(node),
            };
            return Err(Error::NonFinite { t, component: pos % dim.max(1) });
        }
        Ok(Self { grid, dim, span, values })
    }

    /// Samples `f(t)` at every node of the span.
    pub fn from_fn(grid: TimeGrid, dim: usize, span: Span, mut f: impl FnMut(f64, &mut [f64])) -> Self {
        let mut traj = Self::zeros(grid, dim, span);
        for node in 0..traj.len() {
            let t = traj.time(node);
            f(t, traj.node_mut(node));
        }
        traj
    }

    /// Scalar forward trajectory `t -> f(t)`.
    pub fn scalar_forward(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, 1, Span::Forward, |t, out| out[0] = f(t))
    }

    fn span_nodes(grid: &TimeGrid, span: Span) -> usize {
        match span {
            Span::Full => grid.node_count(),
            Span::Forward => grid.n_fwd() + 1,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn span(&self) -> Span {
        self.span
    }

    /// Number of nodes in the span.
    pub fn len(&self) -> usize {
        Self::span_nodes(&self.grid, self.span)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, node: usize) -> f64 {
        match self.span {
            Span::Full => self.grid.time(node),
            Span::Forward => self.grid.forward_time(node),
        }
    }

    pub fn node(&self, node: usize) -> &[f64] {
        &self.values[node * self.dim..(node + 1) * self.dim]
    }

    pub fn node_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.values[node * self.dim..(node + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Samples of component `c` across the span.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.dim).copied().collect()
    }

    /// Restriction of a full-span trajectory to `[0, T]`.
    pub fn forward_part(&self) -> Trajectory {
        match self.span {
            Span::Forward => self.clone(),
            Span::Full => {
                let start = self.grid.n_hist() * self.dim;
                Trajectory {
                    grid: self.grid,
                    dim: self.dim,
                    span: Span::Forward,
                    values: self.values[start..].to_vec(),
                }
            }
        }
    }

    /// Sup-norm distance over the common nodes of two trajectories on the same span.
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}
