use std::fs;

use supctrl_core::experiments::output::{self, Table};
use supctrl_core::experiments::{run_fig1, RunConfig};
use supctrl_core::problem::ProblemDefinition;
use supctrl_core::{Fig1Tracking, Termination};

#[test]
fn desk_run_has_two_jumps_obeying_the_jump_law() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig { output_dir: dir.path().to_path_buf(), ..RunConfig::fig1() };
    let run = run_fig1(&config).unwrap();
    let r = &run.report;
    assert_eq!(r.termination, Termination::Converged);
    assert!(r.stationarity() < 1e-6);
    assert!(r.objective() < r.objective_history[0]);

    let times: Vec<f64> = r.jumps.iter().map(|j| j.time).collect();
    assert_eq!(times.len(), 2, "{times:?}");
    assert!((times[0] - 0.50).abs() <= 0.05 && (times[1] - 1.87).abs() <= 0.05, "{times:?}");
    let grid = *r.control.grid();
    for j in &r.jumps {
        assert!(j.relative_gap() <= 0.1, "{j:?}");
        let node = grid.index(j.time).unwrap() - grid.n_hist();
        assert!((grid.forward_time(node) - j.time).abs() <= grid.dt() / 2.0);
    }

    // first-order condition on the inactive set: beta u_j - lambda_{j+1}
    let p = Fig1Tracking::default();
    for jn in 0..grid.n_fwd() {
        let u = r.control.node(jn)[0];
        if u.abs() < 5.0 {
            assert!((p.beta * u - r.adjoint.lambda.node(jn + 1)[0]).abs() <= 1e-6, "node {jn}");
        }
    }

    // continuity away from the maxima: the delayed coupling contributes no spike outside the jump cores
    let nh = grid.n_hist();
    let dl: Vec<f64> = (0..grid.n_fwd()).map(|i| r.adjoint.dlambda.node(i)[0]).collect();
    let mut sorted: Vec<f64> = dl[1..].iter().map(|d| d.abs()).collect();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let (mut fx, mut jx) = ([0.0], [0.0]);
    for i in 1..grid.n_fwd() {
        if r.jumps.iter().any(|j| (j.core.0..=j.core.1).contains(&i)) {
            continue;
        }
        let x = r.state.node(nh + i);
        p.drift_jac_x(x, r.forward.aux_v.node(i), &mut fx);
        p.running_cost_x(grid.forward_time(i), x, r.control.node(i), &mut jx);
        let delayed = dl[i] + r.adjoint.lambda.node(i + 1)[0] * fx[0] - jx[0];
        assert!(delayed.abs() < 5.0 * median, "t = {}: {delayed} vs median {median}", grid.forward_time(i));
    }

    // files
    let table = Table::read(&dir.path().join(output::SOLUTION_FILE)).unwrap();
    assert_eq!(table, output::solution_table(r));
    assert_eq!(table.header, ["t", "u", "x", "lambda", "dlambda"]);
    let jumps = Table::read(&dir.path().join(output::JUMPS_FILE)).unwrap();
    assert_eq!(jumps.rows.len(), 2);
    let script = fs::read_to_string(dir.path().join(output::PLOT_FILE)).unwrap();
    assert_eq!(script, output::plot_script(&r.jumps));
    let summary = fs::read_to_string(dir.path().join(output::SUMMARY_FILE)).unwrap();
    assert!(summary.contains("Converged") && summary.contains("jumps         2"));
}

#[test]
fn identical_configs_write_identical_files() {
    let run = |seed: u64| {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig { dt: 1e-2, k: 1e3, seed, output_dir: dir.path().to_path_buf(), ..RunConfig::fig1() };
        run_fig1(&config).unwrap();
        [output::SOLUTION_FILE, output::JUMPS_FILE, output::PLOT_FILE].map(|f| fs::read(dir.path().join(f)).unwrap())
    };
    assert_eq!(run(3), run(3));
}

#[test]
fn plot_script_requires_solution_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig { dt: 1e-2, k: 1e3, emit_plots: false, output_dir: dir.path().to_path_buf(), ..RunConfig::fig1() };
    let run = run_fig1(&config).unwrap();
    assert!(!dir.path().join(output::PLOT_FILE).exists());
    let elsewhere = tempfile::tempdir().unwrap();
    assert!(output::emit_plot_script(&run.report, elsewhere.path()).is_err());
    output::emit_plot_script(&run.report, dir.path()).unwrap();
    assert!(dir.path().join(output::PLOT_FILE).is_file());
}
