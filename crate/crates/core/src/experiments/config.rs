//! Flat `key = value` run configuration with dotted sections.
//!
//! ```text
//! # fig1 at desk scale
//! problem = fig1_tracking
//! problem.alpha = 100
//! dt = 1e-3
//! k = 1e4
//! optimizer.tol_stationarity = 1e-6
//! sweep.k_list = 10, 100, 1000, 10000
//! ```
//!
//! Blank lines and `#` comments are ignored; unknown keys are errors.

use std::path::{Path, PathBuf};

use crate::dynamics::problem_grid;
use crate::error::{Error, Result};
use crate::optimizer::{InitialStep, OptimizerConfig};
use crate::problem::{build_problem, ProblemDefinition, ProblemId, ProblemKind};

/// `u(t) = offset + amplitude * sin(frequency * t)`, clipped to the control box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedControl {
    pub amplitude: f64,
    pub frequency: f64,
    pub offset: f64,
}

impl FixedControl {
    pub fn eval(&self, t: f64) -> f64 {
        self.offset + self.amplitude * (self.frequency * t).sin()
    }
}

impl Default for FixedControl {
    fn default() -> Self {
        Self { amplitude: 1.0, frequency: 3.0, offset: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemId,
    pub dt: f64,
    pub k: f64,
    pub optimizer: OptimizerConfig,
    pub output_dir: PathBuf,
    pub emit_plots: bool,
    pub seed: u64,
    /// Sharpness values of the k-convergence sweep.
    pub k_list: Vec<f64>,
    /// Switching frequencies of the nonexistence sweep.
    pub frequencies: Vec<f64>,
    /// Control held fixed by the k-convergence sweep.
    pub control: FixedControl,
}

pub const DESK_DT: f64 = 1e-3;
pub const DESK_K: f64 = 1e4;
pub const PAPER_DT: f64 = 1e-4;
pub const PAPER_K: f64 = 1e6;

impl Default for RunConfig {
    fn default() -> Self {
        Self::fig1()
    }
}

impl RunConfig {
    /// Tracking experiment at desk scale.
    pub fn fig1() -> Self {
        Self {
            problem: ProblemId::new(ProblemKind::Fig1Tracking),
            dt: DESK_DT,
            k: DESK_K,
            optimizer: OptimizerConfig { tol_stationarity: 1e-6, ..Default::default() },
            output_dir: PathBuf::from("out/fig1"),
            emit_plots: true,
            seed: 0,
            k_list: vec![10.0, 1e2, 1e3, 1e4],
            frequencies: vec![10.0, 1e2, 1e3, 1e4],
            control: FixedControl::default(),
        }
    }

    /// Switching-control sweep; the fine step resolves the fastest switching.
    pub fn nonexistence() -> Self {
        Self {
            problem: ProblemId::new(ProblemKind::NonexistenceDemo),
            dt: 1e-6,
            output_dir: PathBuf::from("out/nonexistence"),
            emit_plots: false,
            ..Self::fig1()
        }
    }

    pub fn k_convergence() -> Self {
        Self { output_dir: PathBuf::from("out/kconv"), emit_plots: false, ..Self::fig1() }
    }

    /// Directional-derivative check on a coarse grid.
    pub fn gradcheck() -> Self {
        Self { dt: 1e-2, k: 1e3, output_dir: PathBuf::from("out/gradcheck"), emit_plots: false, ..Self::fig1() }
    }

    pub fn paper_scale(&mut self) {
        self.dt = PAPER_DT;
        self.k = PAPER_K;
    }

    pub fn from_file(path: &Path, base: Self) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = base;
        config.apply_text(&text)?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got `{line}`", lineno + 1)))?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("line {}: {msg}", lineno + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let o = &mut self.problem.overrides;
        let opt = &mut self.optimizer;
        match key {
            "problem" | "problem.name" => self.problem.kind = value.parse()?,
            "problem.alpha" => o.alpha = Some(real(key, value)?),
            "problem.beta" => o.beta = Some(real(key, value)?),
            "problem.tau" => o.tau = Some(real(key, value)?),
            "problem.horizon" => o.horizon = Some(real(key, value)?),
            "problem.u_lo" => o.u_lo = Some(real(key, value)?),
            "problem.u_hi" => o.u_hi = Some(real(key, value)?),
            "dt" => self.dt = real(key, value)?,
            "k" => self.k = real(key, value)?,
            "optimizer.max_iters" => opt.max_iters = integer(key, value)? as usize,
            "optimizer.armijo_c" => opt.armijo_c = real(key, value)?,
            "optimizer.backtrack" => opt.backtrack = real(key, value)?,
            "optimizer.step0" => opt.step0 = real(key, value)?,
            "optimizer.tol_stationarity" => opt.tol_stationarity = real(key, value)?,
            "optimizer.min_step" => opt.min_step = real(key, value)?,
            "optimizer.initial_step" => {
                opt.initial_step = match value {
                    "fixed" => InitialStep::Fixed,
                    "bb" | "barzilai_borwein" => InitialStep::BarzilaiBorwein,
                    _ => return Err(Error::Config(format!("{key}: expected `fixed` or `bb`, got `{value}`"))),
                }
            }
            "output_dir" => self.output_dir = PathBuf::from(value),
            "emit_plots" => {
                self.emit_plots = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(Error::Config(format!("{key}: expected a boolean, got `{value}`"))),
                }
            }
            "seed" => self.seed = integer(key, value)?,
            "sweep.k_list" => self.k_list = list(key, value)?,
            "sweep.frequencies" => self.frequencies = list(key, value)?,
            "control.amplitude" => self.control.amplitude = real(key, value)?,
            "control.frequency" => self.control.frequency = real(key, value)?,
            "control.offset" => self.control.offset = real(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Builds the problem and checks every parameter against it.
    pub fn validate(&self) -> Result<Box<dyn ProblemDefinition>> {
        let problem = build_problem(&self.problem)?;
        problem_grid(problem.as_ref(), self.dt)?;
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::Config(format!("k must be positive and finite, got {}", self.k)));
        }
        self.optimizer.validate()?;
        for (name, values) in [("sweep.k_list", &self.k_list), ("sweep.frequencies", &self.frequencies)] {
            if values.is_empty() || values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Config(format!("{name} must be a non-empty list of positive numbers")));
            }
        }
        let c = &self.control;
        if ![c.amplitude, c.frequency, c.offset].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("control parameters must be finite".into()));
        }
        Ok(problem)
    }
}

fn real(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Config(format!("{key}: expected a finite number, got `{value}`")))
}

fn integer(key: &str, value: &str) -> Result<u64> {
    value.parse().map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got `{value}`")))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| real(key, v.trim())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_lists() {
        let mut c = RunConfig::fig1();
        c.apply_text(
            "# comment\n\nproblem = fig1_tracking\nproblem.alpha = 0  # inline\ndt=2e-3\n\
             optimizer.initial_step = fixed\nsweep.k_list = 1, 2,3\nemit_plots = no\nseed = 7\n",
        )
        .unwrap();
        assert_eq!(c.problem.overrides.alpha, Some(0.0));
        assert_eq!(c.dt, 2e-3);
        assert_eq!(c.optimizer.initial_step, InitialStep::Fixed);
        assert_eq!(c.k_list, vec![1.0, 2.0, 3.0]);
        assert!(!c.emit_plots);
        assert_eq!(c.seed, 7);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = RunConfig::fig1();
        for text in ["nonsense", "colour = red", "dt = fast", "k = inf", "seed = -1", "problem = other"] {
            assert!(c.apply_text(text).is_err(), "{text}");
        }
        let err = c.apply_text("dt = 1e-3\nfoo = 1").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn validation_catches_inconsistent_values() {
        let bad = [
            RunConfig { dt: 0.3, ..RunConfig::fig1() },
            RunConfig { k: -1.0, ..RunConfig::fig1() },
            RunConfig { k_list: vec![], ..RunConfig::fig1() },
            RunConfig { optimizer: OptimizerConfig { backtrack: 2.0, ..Default::default() }, ..RunConfig::fig1() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        let mut c = RunConfig::fig1();
        c.set("problem.beta", "-1").unwrap();
        assert!(matches!(c.validate(), Err(Error::InvalidProblem(_))));
    }

    #[test]
    fn paper_scale_switches_step_and_sharpness() {
        let mut c = RunConfig::fig1();
        c.paper_scale();
        assert_eq!((c.dt, c.k), (PAPER_DT, PAPER_K));
        assert!(c.validate().is_ok());
    }
}
