//! Command implementations behind the `resalloc` binary.
//!
//! Exit codes: 0 success, 1 configuration error, 2 allocation infeasible at
//! start, 3 internal error (including oracle mismatches).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::allocator::{oracle_check, solve, InstanceLimits, ProblemFile, SolutionReport, SolveOptions};
use crate::error::{Error, Result};
use crate::sim::{
    builtin, margin_tolerance, persistently_negative, randomized_trials, recovers_after_faults, run_scenario,
    scaled_problem, Randomize, RunOptions, ScenarioConfig, TaskConfig, BUILTIN, RECOVERY_HORIZON,
};
use crate::tasks::TaskKind;

/// Environment variable that overrides the default output directory.
pub const OUT_DIR_ENV: &str = "RESALLOC_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "resalloc", version, about = "Resilient task allocation for heterogeneous robot teams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write its trace.
    Run(RunArgs),
    /// Solve one allocation problem from a TOML file and print the result as JSON.
    Solve(SolveArgs),
    /// Cross-check the solver against exhaustive enumeration on random instances.
    OracleCheck(OracleArgs),
    /// Time the solver on the mission problem scaled to several team sizes.
    Bench(BenchArgs),
    /// List the built-in scenarios, or print one as TOML.
    Scenarios(ScenariosArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Built-in scenario name or path to a scenario file.
    #[arg(long)]
    pub scenario: String,
    /// Output directory (default: $RESALLOC_OUT_DIR, else `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trigger threshold χ.
    #[arg(long)]
    pub chi: Option<f64>,
    #[arg(long)]
    pub dv_thresh: Option<f64>,
    /// Balance weight l.
    #[arg(long, visible_alias = "l")]
    pub balance_weight: Option<f64>,
    #[arg(long)]
    pub delta_max: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub duration: Option<f64>,
    /// Allocate once at t = 0 and never again.
    #[arg(long)]
    pub no_trigger: bool,
    /// Run this many randomized trials instead of a single run.
    #[arg(long)]
    pub trials: Option<usize>,
    /// What each trial randomizes: none, env or params.
    #[arg(long, default_value = "env")]
    pub randomize: Randomize,
    /// Record per-solve wall-clock times in summary.json.
    #[arg(long)]
    pub wall_times: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Problem file (TOML).
    pub problem: PathBuf,
    /// Also write the JSON report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = SolveOptions::default().node_limit)]
    pub node_limit: u64,
    #[arg(long, default_value_t = SolveOptions::default().gap_tol)]
    pub gap_tol: f64,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 100)]
    pub instances: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest tolerated objective difference.
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Team sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2,5,10,20,40")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Output directory (default: $RESALLOC_OUT_DIR, else `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = SolveOptions::default().node_limit)]
    pub node_limit: u64,
}

#[derive(Debug, Args)]
pub struct ScenariosArgs {
    /// Print this built-in scenario as TOML.
    #[arg(long)]
    pub dump: Option<String>,
}

/// Exit code for a failed command.
pub fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Config { .. } | Error::Contract(_) | Error::Dimension { .. } => 1,
        Error::Infeasible(_) => 2,
        _ => 3,
    }
}

/// Parse `args` (program name first), run the command and return the exit
/// code. Reports go to `out`, diagnostics to `err`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Run a parsed command. Returns the exit code of a command that completed
/// but has a failing verdict (oracle mismatches).
pub fn execute(command: &Command, out: &mut dyn Write) -> Result<u8> {
    match command {
        Command::Run(args) => cmd_run(args, out).map(|_| 0),
        Command::Solve(args) => cmd_solve(args, out).map(|_| 0),
        Command::OracleCheck(args) => cmd_oracle_check(args, out),
        Command::Bench(args) => cmd_bench(args, out).map(|_| 0),
        Command::Scenarios(args) => cmd_scenarios(args, out).map(|_| 0),
    }
}

fn out_dir(explicit: &Option<PathBuf>) -> PathBuf {
    explicit
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// A built-in scenario by name, otherwise a scenario file.
pub fn load_scenario(name_or_path: &str) -> Result<ScenarioConfig> {
    match builtin(name_or_path) {
        Some(config) => Ok(config),
        None => {
            let path = Path::new(name_or_path);
            if !path.exists() {
                return Err(Error::config(
                    "--scenario",
                    format!("`{name_or_path}` is neither a built-in scenario ({}) nor a file", BUILTIN.join(", ")),
                ));
            }
            ScenarioConfig::from_file(path)
        }
    }
}

/// Apply the command-line overrides to `config`, validate the result and
/// return the overrides as recorded in `summary.json`.
pub fn apply_overrides(config: &mut ScenarioConfig, args: &RunArgs) -> Result<Map<String, Value>> {
    let mut applied = Map::new();
    if let Some(seed) = args.seed {
        config.seed = seed;
        applied.insert("seed".into(), json!(seed));
    }
    let sim = &mut config.sim;
    for (key, value, slot) in [
        ("chi", args.chi, &mut sim.chi),
        ("dv_thresh", args.dv_thresh, &mut sim.dv_thresh),
        ("balance_weight", args.balance_weight, &mut sim.balance_weight),
        ("delta_max", args.delta_max, &mut sim.delta_max),
        ("dt", args.dt, &mut sim.dt),
        ("duration", args.duration, &mut sim.duration),
    ] {
        if let Some(v) = value {
            *slot = v;
            applied.insert(key.into(), json!(v));
        }
    }
    if args.no_trigger {
        sim.trigger = false;
        applied.insert("trigger".into(), json!(false));
    }
    config.validate()?;
    Ok(applied)
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = load_scenario(&args.scenario)?;
    let overrides = apply_overrides(&mut config, args)?;
    let dir = out_dir(&args.out);
    let mut options = RunOptions {
        record_wall_times: args.wall_times,
        overrides,
        ..Default::default()
    };
    match args.trials {
        None => {
            let trace = run_scenario(&config, &options)?;
            trace.write(&dir)?;
            writeln!(
                out,
                "{}: {} ticks, {} solves, traces in {}",
                config.name,
                trace.summary.ticks,
                trace.summary.solves,
                dir.display()
            )?;
        }
        Some(n) => {
            if n == 0 {
                return Err(Error::config("--trials", "must be at least 1"));
            }
            options.events_only = true;
            let report = randomized_trials(&config, n, args.randomize, &options)?;
            std::fs::create_dir_all(&dir)?;
            report.write_csv(&dir.join("trials.csv"))?;
            let summary = trial_summary(&config, &report, &options.overrides);
            std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
            writeln!(
                out,
                "{}: {} {:?} trials, {} recovered with reallocation, {} persistently negative without; results in {}",
                config.name,
                n,
                args.randomize,
                summary.recovered,
                summary.baseline_persistently_negative,
                dir.display()
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct TrialSummary {
    scenario: String,
    seed: u64,
    trials: usize,
    randomize: Randomize,
    tracking_tasks: Vec<usize>,
    epsilon: f64,
    recovered: usize,
    baseline_persistently_negative: usize,
    per_trial: Vec<TrialLine>,
    #[serde(skip_serializing_if = "Map::is_empty")]
    overrides: Map<String, Value>,
}

#[derive(Debug, Serialize)]
struct TrialLine {
    index: u64,
    recovers: bool,
    baseline_persistently_negative: bool,
    solves: usize,
    min_margins: Vec<f64>,
}

/// Tasks whose margins the trial verdicts watch: the tracking tasks, or
/// every task when there are none.
pub fn tracking_tasks(tasks: &[TaskConfig]) -> Vec<usize> {
    let tracking: Vec<usize> = tasks
        .iter()
        .enumerate()
        .filter(|(_, t)| !matches!(t.kind, TaskKind::Coverage { .. }))
        .map(|(m, _)| m)
        .collect();
    if tracking.is_empty() {
        (0..tasks.len()).collect()
    } else {
        tracking
    }
}

fn trial_summary(
    config: &ScenarioConfig,
    report: &crate::sim::TrialReport,
    overrides: &Map<String, Value>,
) -> TrialSummary {
    let tasks = tracking_tasks(&config.tasks);
    let eps = margin_tolerance(config, &tasks);
    let per_trial: Vec<TrialLine> = report
        .outcomes
        .iter()
        .map(|o| TrialLine {
            index: o.index,
            recovers: recovers_after_faults(&o.adaptive, &o.config, &tasks, eps, RECOVERY_HORIZON),
            baseline_persistently_negative: persistently_negative(&o.baseline, &tasks, eps, RECOVERY_HORIZON),
            solves: o.adaptive.summary.solves,
            min_margins: o.adaptive.summary.min_margins.clone(),
        })
        .collect();
    TrialSummary {
        scenario: config.name.clone(),
        seed: config.seed,
        trials: per_trial.len(),
        randomize: report.randomize,
        epsilon: eps,
        recovered: per_trial.iter().filter(|t| t.recovers).count(),
        baseline_persistently_negative: per_trial.iter().filter(|t| t.baseline_persistently_negative).count(),
        tracking_tasks: tasks,
        per_trial,
        overrides: overrides.clone(),
    }
}

fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<()> {
    let problem = ProblemFile::load(&args.problem)?;
    let options = SolveOptions {
        node_limit: args.node_limit,
        gap_tol: args.gap_tol,
        ..Default::default()
    };
    let solution = solve(&problem, &options)?;
    let text = serde_json::to_string_pretty(&SolutionReport::new(&problem, &solution))? + "\n";
    if let Some(path) = &args.out {
        std::fs::write(path, &text)?;
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn cmd_oracle_check(args: &OracleArgs, out: &mut dyn Write) -> Result<u8> {
    if args.instances == 0 {
        return Err(Error::config("--instances", "must be at least 1"));
    }
    let exact = SolveOptions {
        gap_tol: 0.0,
        ..Default::default()
    };
    let report = oracle_check(args.instances, args.seed, InstanceLimits::default(), &exact, args.tolerance)?;
    writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    writeln!(
        out,
        "{} instances, {} objective mismatches, {} replay failures",
        report.instances,
        report.mismatches.len(),
        report.replay_failures.len()
    )?;
    Ok(if report.passed() { 0 } else { 3 })
}

/// One row of `bench.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub reps: usize,
    pub median_ms: f64,
    pub std_ms: f64,
    pub nodes: u64,
    pub gap: f64,
    pub node_limit_hit: bool,
}

/// Solve the scaled mission problem `reps` times for every size.
pub fn bench(sizes: &[usize], reps: usize, node_limit: u64) -> Result<Vec<BenchRow>> {
    if let Some(i) = sizes.iter().position(|&n| n == 0) {
        return Err(Error::config(format!("--sizes[{i}]"), "team sizes must be at least 1"));
    }
    if reps == 0 {
        return Ok(Vec::new());
    }
    let options = SolveOptions {
        node_limit,
        ..Default::default()
    };
    sizes
        .iter()
        .map(|&n| {
            let problem = scaled_problem(n);
            let mut times = Vec::with_capacity(reps);
            let mut last = None;
            for _ in 0..reps {
                let start = Instant::now();
                let solution = solve(&problem, &options)?;
                times.push(start.elapsed().as_secs_f64() * 1e3);
                last = Some(solution);
            }
            let stats = last.expect("reps > 0").stats;
            Ok(BenchRow {
                n,
                reps,
                median_ms: median(&mut times.clone()),
                std_ms: std_dev(&times),
                nodes: stats.nodes,
                gap: stats.gap,
                node_limit_hit: stats.node_limit_hit,
            })
        })
        .collect()
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn std_dev(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    let rows = bench(&args.sizes, args.reps, args.node_limit)?;
    let dir = out_dir(&args.out);
    std::fs::create_dir_all(&dir)?;
    let mut csv = String::from("n,reps,median_ms,std_ms,nodes,gap,node_limit_hit\n");
    for r in &rows {
        csv += &format!(
            "{},{},{},{},{},{},{}\n",
            r.n, r.reps, r.median_ms, r.std_ms, r.nodes, r.gap, r.node_limit_hit
        );
        writeln!(out, "N = {:3}: median {:.3} ms, std {:.3} ms, {} nodes", r.n, r.median_ms, r.std_ms, r.nodes)?;
    }
    std::fs::write(dir.join("bench.csv"), csv)?;
    writeln!(out, "wrote {}", dir.join("bench.csv").display())?;
    Ok(())
}

fn cmd_scenarios(args: &ScenariosArgs, out: &mut dyn Write) -> Result<()> {
    match &args.dump {
        Some(name) => {
            let config =
                builtin(name).ok_or_else(|| Error::config("--dump", format!("unknown scenario `{name}`")))?;
            out.write_all(config.to_toml_string().as_bytes())?;
        }
        None => {
            for name in BUILTIN {
                let c = builtin(name).expect("known scenario");
                writeln!(
                    out,
                    "{name:<24} {} robots, {} tasks, {} s",
                    c.num_robots(),
                    c.num_tasks(),
                    c.sim.duration
                )?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (u8, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = main_with(std::iter::once("resalloc").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_are_config_errors() {
        assert_eq!(run(&["frobnicate"]).0, 1);
        assert_eq!(run(&[]).0, 1);
        assert_eq!(run(&["--help"]).0, 0);
    }

    #[test]
    fn zero_reps_bench_is_empty() {
        assert!(bench(&[2, 40], 0, 1000).unwrap().is_empty());
        assert!(matches!(bench(&[0], 1, 1000), Err(Error::Config { .. })));
    }

    #[test]
    fn overrides_are_validated_and_recorded() {
        let args = Cli::try_parse_from(["resalloc", "run", "--scenario", "example1", "--chi", "0.2", "--no-trigger"])
            .unwrap();
        let Command::Run(args) = args.command else { panic!() };
        let mut config = load_scenario(&args.scenario).unwrap();
        let applied = apply_overrides(&mut config, &args).unwrap();
        assert_eq!(config.sim.chi, 0.2);
        assert!(!config.sim.trigger);
        assert_eq!(applied["chi"], json!(0.2));
        assert_eq!(applied["trigger"], json!(false));

        let bad = Cli::try_parse_from(["resalloc", "run", "--scenario", "example1", "--dt=-1"]).unwrap();
        let Command::Run(bad) = bad.command else { panic!() };
        let err = apply_overrides(&mut load_scenario("example1").unwrap(), &bad).unwrap_err();
        assert_eq!(exit_code(&err), 1);
    }

    #[test]
    fn unknown_scenario_is_a_config_error() {
        let (code, _, err) = run(&["run", "--scenario", "no_such_scenario_here"]);
        assert_eq!(code, 1);
        assert!(err.contains("--scenario"), "{err}");
    }

    #[test]
    fn lists_builtins() {
        let (code, out, _) = run(&["scenarios"]);
        assert_eq!(code, 0);
        for name in BUILTIN {
            assert!(out.contains(name));
        }
        let (code, out, _) = run(&["scenarios", "--dump", "example1"]);
        assert_eq!(code, 0);
        assert_eq!(ScenarioConfig::from_toml_str(&out).unwrap(), load_scenario("example1").unwrap());
    }
}
