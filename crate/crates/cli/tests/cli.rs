use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsectl")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn schedule_identity_system() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.txt", "1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n");
    let out = run(&["schedule", "--a-file", &a, "--b-dist", "identity", "--s", "2", "--method", "li"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out), "1 2\n3 4\n");
}

#[test]
fn schedule_then_energy_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sched = dir.path().join("s.txt").display().to_string();
    let out = run(&["schedule", "--n", "8", "--m", "10", "--seed", "3", "--s", "2", "--out", &sched]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&sched).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().all(|l| l.split_whitespace().count() <= 2));

    let out = run(&["energy", "--n", "8", "--m", "10", "--seed", "3", "--schedule", &sched]);
    assert!(out.status.success());
    let report = stdout(&out);
    assert!(report.contains("rank = 8"));
    assert!(report.contains("trace_inverse = "));
}

#[test]
fn rank_deficient_schedule_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.txt", "1 0\n0 1\n");
    let sched = write(dir.path(), "s.txt", "1\n1\n");
    let out = run(&["energy", "--a-file", &a, "--b-dist", "identity", "--schedule", &sched]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("trace_inverse = undefined"));
}

#[test]
fn infeasible_budget_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.txt", "0 0\n0 0\n");
    let out = run(&["schedule", "--a-file", &a, "--b-dist", "identity", "--s", "1", "--k", "4"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["schedule", "--n", "5", "--s", "1"]).status.code(), Some(2));
    assert_eq!(run(&["experiment", "energy-vs-s", "--n", "5"]).status.code(), Some(2));
    assert_eq!(run(&["experiment", "no-such-experiment", "--seed", "1"]).status.code(), Some(2));
    assert_eq!(run(&["schedule", "--bogus"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "a.txt", "1 2\n3\n");
    let out = run(&["schedule", "--a-file", &bad, "--s", "1", "--b-dist", "identity"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn experiment_csv_is_reproducible() {
    let args = ["experiment", "relative-energy", "--n", "4", "--m", "4", "--trials", "2", "--seed", "9"];
    let first = run(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let csv = stdout(&first);
    assert!(csv.lines().any(|l| l.starts_with("s,s_over_m,k,status,rho")));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 5);
    assert_eq!(stdout(&run(&args)), csv);
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", "experiment = energy-vs-s\nseed = 4\nn = 6\ns = 2,3\ntrials = 2\n");
    let out_path = dir.path().join("out.csv");
    let out = run(&["experiment", "--config", &cfg, "--n", "30", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_path).unwrap();
    assert!(csv.contains("# n = 6"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 3);
}

#[test]
fn all_infeasible_experiment_exits_3() {
    let out = run(&["experiment", "energy-vs-s", "--n", "6", "--m", "3", "--s", "2", "--trials", "1", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("infeasible"));
}

#[test]
fn track_writes_csv() {
    let out = run(&[
        "track", "--n", "6", "--m", "12", "--s", "3", "--horizon", "8", "--trials", "4", "--seed", "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = stdout(&out);
    assert!(csv.contains("step,mse,mse_db,bound,floor"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 9);
}

#[test]
fn estimate_x0_recovers_state() {
    let dir = tempfile::tempdir().unwrap();
    // x(k+1) = A x(k) with x(0) = (1, -2), one sensor read per step.
    let a = write(dir.path(), "a.txt", "0 1\n-1 0\n");
    let c = write(dir.path(), "c.txt", "1 0\n0 1\n");
    let y = write(dir.path(), "y.txt", "1 -2\n-2 -1\n");
    let out = run(&[
        "estimate-x0", "--a-file", &a, "--b-dist", "identity", "--c-file", &c, "--measurements", &y, "--s", "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let values: Vec<f64> = stdout(&out)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.trim().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 2);
    assert!((values[0] - 1.0).abs() < 1e-12 && (values[1] + 2.0).abs() < 1e-12);
}
