//! The `resalloc` binary: outputs, overrides and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use resalloc::allocator::ProblemFile;
use resalloc::sim::{example1, initial_problem};

fn resalloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resalloc"))
        .args(args)
        .env_remove("RESALLOC_OUT_DIR")
        .output()
        .unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

const TRACE_FILES: [&str; 5] = ["robots.csv", "degradation.csv", "margins.csv", "events.jsonl", "summary.json"];

fn read_all(dir: &Path) -> Vec<Vec<u8>> {
    TRACE_FILES.iter().map(|f| std::fs::read(dir.join(f)).unwrap()).collect()
}

#[test]
fn run_writes_the_trace_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = resalloc(&["run", "--scenario", "example1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    for file in TRACE_FILES {
        assert!(dir.path().join(file).metadata().unwrap().len() > 0, "{file}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = resalloc(&["run", "--scenario", "example2", "--seed", "7", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(read_all(a.path()), read_all(b.path()));
}

#[test]
fn overrides_are_recorded_in_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = resalloc(&[
        "run",
        "--scenario",
        "example1",
        "--chi",
        "0.5",
        "--dv-thresh",
        "0.8",
        "--l",
        "2",
        "--no-trigger",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    let o = &summary["overrides"];
    assert_eq!(o["chi"], 0.5);
    assert_eq!(o["dv_thresh"], 0.8);
    assert_eq!(o["balance_weight"], 2.0);
    assert_eq!(o["trigger"], false);
    assert_eq!(summary["solves"], 1);
}

#[test]
fn out_dir_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_resalloc"))
        .args(["run", "--scenario", "example1"])
        .env("RESALLOC_OUT_DIR", dir.path())
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("summary.json").exists());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn malformed_scenario_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut toml = example1().to_toml_string();
    toml = toml.replace("dt = ", "dtt = ");
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, toml).unwrap();
    let out = resalloc(&["run", "--scenario", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("dtt"), "{}", text(&out.stderr));
}

#[test]
fn invalid_override_is_a_config_error() {
    let out = resalloc(&["run", "--scenario", "example1", "--chi=-1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("chi"), "{}", text(&out.stderr));
}

#[test]
fn infeasible_start_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = example1();
    for task in &mut config.tasks {
        for row in &mut task.requirements {
            for y in row.iter_mut() {
                *y *= 1000.0;
            }
        }
    }
    config.sim.delta_max = 0.1;
    let path = dir.path().join("greedy.toml");
    std::fs::write(&path, config.to_toml_string()).unwrap();
    let out = resalloc(&["run", "--scenario", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out.stderr));
}

#[test]
fn solve_prints_a_solution_report() {
    let dir = tempfile::tempdir().unwrap();
    let problem = initial_problem(&example1());
    let path = dir.path().join("problem.toml");
    std::fs::write(&path, ProblemFile::from_problem(&problem).to_toml_string()).unwrap();
    let out = resalloc(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["A"].as_array().unwrap().len(), problem.num_tasks());
    assert!(report["gap"].as_f64().unwrap() <= 1e-9);
    assert_eq!(report["node_limit_hit"], false);
}

#[test]
fn malformed_problem_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("problem.toml");
    let toml = ProblemFile::from_problem(&initial_problem(&example1())).to_toml_string();
    std::fs::write(&path, toml.replace("balance_weight = ", "balance_weight = -")).unwrap();
    let out = resalloc(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("balance_weight"), "{}", text(&out.stderr));
}

#[test]
fn empty_bench_is_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = resalloc(&["bench", "--reps", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1, "{csv}");
}

#[test]
fn oracle_check_passes() {
    let out = resalloc(&["oracle-check", "--instances", "20", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));
    assert!(text(&out.stdout).contains("0 objective mismatches"));
}

#[test]
fn trial_batch_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = resalloc(&["run", "--scenario", "example2", "--trials", "3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trials.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,task_id,adaptive,baseline"));
    assert!(csv.lines().count() > 1);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["trials"], 3);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(resalloc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(resalloc(&["--help"]).status.code(), Some(0));
}
