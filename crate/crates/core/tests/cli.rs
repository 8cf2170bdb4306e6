use std::fs;
use std::process::Command;

fn supctrl(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_supctrl")).args(args).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = supctrl(&["gradcheck", "--seed", "9", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    assert!(dir.path().join("gradcheck.csv").is_file());
}

#[test]
fn configuration_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(supctrl(&["fig1", "--dt", "0.3", "--out", out]).0, 3);
    assert_eq!(supctrl(&["fig1", "--k=-1", "--out", out]).0, 3);
    assert_eq!(supctrl(&["fig1", "--bogus"]).0, 3);
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "problem.gamma = 1\n").unwrap();
    assert_eq!(supctrl(&["fig1", "--config", cfg.to_str().unwrap(), "--out", out]).0, 3);
    assert_eq!(supctrl(&["fig1", "--config", "/nonexistent/run.cfg", "--out", out]).0, 3);
    assert_eq!(supctrl(&["nonexistence", "--config", cfg.to_str().unwrap()]).0, 3);
}

#[test]
fn failed_assertions_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    fs::write(&cfg, "sweep.frequencies = 1000, 10\ndt = 1e-4\n").unwrap();
    let (code, text) = supctrl(&["nonexistence", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 2, "{text}");
    assert!(dir.path().join("nonexistence.csv").is_file());
}

#[test]
fn unfinished_optimization_exits_with_one_and_flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "optimizer.max_iters = 3\ndt = 1e-3\nk = 1e3\noutput_dir = /nonexistent/dir\n").unwrap();
    let (code, text) = supctrl(&["fig1", "--config", cfg.to_str().unwrap(), "--dt", "1e-2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 1, "{text}");
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("MaxIters") && summary.contains("dt            1e-2"), "{summary}");
}

#[test]
fn sweeps_succeed_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, text) = supctrl(&["kconv", "--out", out]);
    assert_eq!(code, 0, "{text}");
    let cfg = dir.path().join("ne.cfg");
    fs::write(&cfg, "dt = 1e-5\nsweep.frequencies = 10, 100, 1000\n").unwrap();
    let (code, text) = supctrl(&["nonexistence", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(code, 0, "{text}");
}
