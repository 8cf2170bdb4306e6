//! Command-line entry point.
//!
//! Exit codes: 0 converged or all checks passed, 1 optimizer stopped without
//! converging, 2 assertion failure, 3 configuration or usage error, 4 other failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use supctrl_core::experiments::{self, RunConfig};
use supctrl_core::{Error, Termination};

#[derive(Parser)]
#[command(name = "supctrl", about = "Optimal control with running-maximum dynamics", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the tracking problem and write solution, jumps, summary, and plot files.
    Fig1(Common),
    /// Evaluate switching controls approaching the unattained infimum.
    Nonexistence(Common),
    /// Compare regularized and hard-max states across sharpness values.
    Kconv(Common),
    /// Check the adjoint gradient against central differences.
    Gradcheck(Common),
}

#[derive(Args)]
struct Common {
    /// key = value configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// dt = 1e-4, k = 1e6 (applied before the other flags).
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self, base: RunConfig) -> Result<RunConfig, Error> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path, base)?,
            None => base,
        };
        if self.paper_scale {
            config.paper_scale();
        }
        if let Some(dt) = self.dt {
            config.dt = dt;
        }
        if let Some(k) = self.k {
            config.k = k;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::AssertionFailure(_) => 2,
        Error::Config(_)
        | Error::UnknownProblem(_)
        | Error::InvalidProblem(_)
        | Error::InvalidGrid(_)
        | Error::NonCommensurateStep { .. }
        | Error::BadBounds { .. }
        | Error::BadSharpness(_) => 3,
        _ => 4,
    }
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Fig1(args) => {
            let config = args.resolve(RunConfig::fig1())?;
            let run = experiments::run_fig1(&config)?;
            let r = &run.report;
            println!(
                "{:?} after {} iterations in {:.1} s: objective {:.10e}, stationarity {:.3e}",
                r.termination,
                r.iterations,
                run.seconds,
                r.objective(),
                r.stationarity()
            );
            for j in &r.jumps {
                println!(
                    "jump at t = {:.4}: magnitude {:.6e}, predicted {:.6e} ({:.1}% apart)",
                    j.time,
                    j.magnitude,
                    j.predicted,
                    100.0 * j.relative_gap()
                );
            }
            println!("wrote {}", config.output_dir.display());
            Ok(if r.termination == Termination::Converged { 0 } else { 1 })
        }
        Command::Nonexistence(args) => {
            let config = args.resolve(RunConfig::nonexistence())?;
            let rows = experiments::run_nonexistence(&config, &config.frequencies.clone())?;
            for (kappa, value) in rows {
                println!("kappa {kappa:>10}: objective {value:.6}");
            }
            Ok(0)
        }
        Command::Kconv(args) => {
            let config = args.resolve(RunConfig::k_convergence())?;
            let rows = experiments::run_k_convergence(&config, &config.k_list.clone())?;
            println!("{:>10} {:>12} {:>12} {:>12}", "k", "state gap", "lie gap", "envelope");
            for r in rows {
                println!("{:>10} {:>12.4e} {:>12.4e} {:>12.4e}", r.k, r.state_gap, r.lie_gap, r.envelope);
            }
            Ok(0)
        }
        Command::Gradcheck(args) => {
            let config = args.resolve(RunConfig::gradcheck())?;
            let errors = experiments::run_gradcheck(&config)?;
            let worst = errors.iter().copied().fold(0.0, f64::max);
            println!("{} directional derivatives, worst relative error {worst:.3e}", errors.len());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
