use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tasks::TaskKind;

use super::config::ScenarioConfig;
use super::runner::{run_scenario, RunOptions};
use super::trace::{EventKind, SimTrace};

/// What each trial perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Randomize {
    /// Every trial runs the base configuration.
    #[default]
    None,
    /// Target schedules, disturbance windows and initial positions.
    Env,
    /// `W_s`, `w_J`, `δ_max`, `l`, `T` and `χ`, each drawn from a normal
    /// centred on its nominal value with a standard deviation of 40% of it.
    Params,
}

impl std::str::FromStr for Randomize {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Randomize::None),
            "env" => Ok(Randomize::Env),
            "params" => Ok(Randomize::Params),
            _ => Err(format!("unknown randomization `{s}` (expected none, env or params)")),
        }
    }
}

/// Largest shift, in seconds, applied to target schedules and disturbance
/// windows by environment randomization.
pub const TIMING_JITTER: f64 = 2.0;
/// Largest per-axis displacement, in metres, of initial positions.
pub const POSITION_JITTER: f64 = 1.0;
/// Relative standard deviation of parameter perturbations.
pub const PARAM_SPREAD: f64 = 0.4;

/// Random generator of trial `index`: one ChaCha stream per trial, so any
/// trial can be reproduced on its own.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Configuration of trial `index`.
pub fn trial_config(base: &ScenarioConfig, randomize: Randomize, index: u64) -> ScenarioConfig {
    let mut config = base.clone();
    let mut rng = trial_rng(base.seed, index);
    match randomize {
        Randomize::None => {}
        Randomize::Env => randomize_env(&mut config, &mut rng),
        Randomize::Params => randomize_params(&mut config, &mut rng),
    }
    config
}

fn randomize_env(config: &mut ScenarioConfig, rng: &mut ChaCha8Rng) {
    for task in &mut config.tasks {
        let shift = rng.gen_range(-TIMING_JITTER..=TIMING_JITTER);
        match &mut task.kind {
            TaskKind::TargetTracking { target, .. } => *target = target.shifted(shift),
            TaskKind::GoalTracking { goal } | TaskKind::Follower { goal, .. } => {
                *goal = goal.shifted(shift)
            }
            TaskKind::Coverage { .. } => {}
        }
    }
    for d in &mut config.disturbances {
        let shift = rng.gen_range(-TIMING_JITTER..=TIMING_JITTER);
        // Standing zones stay in place; only timed events move.
        if d.start > 0.0 {
            d.start = (d.start + shift).max(0.0);
            d.end += shift;
        }
    }
    for p in &mut config.team.positions {
        p[0] += rng.gen_range(-POSITION_JITTER..=POSITION_JITTER);
        p[1] += rng.gen_range(-POSITION_JITTER..=POSITION_JITTER);
    }
}

/// Draws `N(x, (0.4·x)²)`, clamped to `[lo, hi]`.
fn perturb(rng: &mut ChaCha8Rng, x: f64, lo: f64, hi: f64) -> f64 {
    if x == 0.0 {
        return x;
    }
    let normal = Normal::new(x, PARAM_SPREAD * x.abs()).expect("finite spread");
    normal.sample(rng).clamp(lo, hi)
}

fn randomize_params(config: &mut ScenarioConfig, rng: &mut ChaCha8Rng) {
    for w in &mut config.team.deployment_costs {
        *w = perturb(rng, *w, 0.0, f64::INFINITY);
    }
    for task in &mut config.tasks {
        task.weight = perturb(rng, task.weight, 0.0, f64::INFINITY);
        task.transition_cost = perturb(rng, task.transition_cost, 0.0, f64::INFINITY);
    }
    let sim = &mut config.sim;
    // Positive parameters are kept at least 5% of nominal.
    sim.delta_max = perturb(rng, sim.delta_max, 0.05 * sim.delta_max, f64::INFINITY);
    sim.balance_weight = perturb(rng, sim.balance_weight, 0.05 * sim.balance_weight, f64::INFINITY);
    sim.chi = perturb(rng, sim.chi, 0.05 * sim.chi, 1.0);
}

/// One trial under both allocation policies.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub index: u64,
    pub config: ScenarioConfig,
    /// Event-triggered reallocation.
    pub adaptive: SimTrace,
    /// Allocated once at `t = 0`.
    pub baseline: SimTrace,
}

/// Worst margin of one task at one tick across all trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstMarginRow {
    pub t: f64,
    pub task: usize,
    pub adaptive: f64,
    pub baseline: f64,
}

#[derive(Debug, Clone)]
pub struct TrialReport {
    pub randomize: Randomize,
    pub outcomes: Vec<TrialOutcome>,
}

/// Runs `n_trials` trials of `base`, each with and without reallocation, in
/// parallel. Results are identical to a sequential run.
pub fn randomized_trials(
    base: &ScenarioConfig,
    n_trials: usize,
    randomize: Randomize,
    options: &RunOptions,
) -> Result<TrialReport> {
    let outcomes = (0..n_trials as u64)
        .into_par_iter()
        .map(|index| {
            let config = trial_config(base, randomize, index);
            config.validate()?;
            let adaptive = run_scenario(&config, options)?;
            let mut once = config.clone();
            once.sim.trigger = false;
            let baseline = run_scenario(&once, options)?;
            Ok(TrialOutcome {
                index,
                config,
                adaptive,
                baseline,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialReport {
        randomize,
        outcomes,
    })
}

impl TrialReport {
    /// Per-tick worst margin of every task across trials, for both policies.
    pub fn worst_margins(&self) -> Vec<WorstMarginRow> {
        let Some(first) = self.outcomes.first() else {
            return Vec::new();
        };
        let mut rows = Vec::new();
        for task in 0..first.adaptive.num_tasks {
            let series: Vec<_> = self
                .outcomes
                .iter()
                .map(|o| (o.adaptive.worst_margin_series(task), o.baseline.worst_margin_series(task)))
                .collect();
            for (k, &(t, _)) in series[0].0.iter().enumerate() {
                let fold = |pick: &dyn Fn(&(Vec<(f64, f64)>, Vec<(f64, f64)>)) -> f64| {
                    series.iter().map(pick).fold(f64::INFINITY, f64::min)
                };
                rows.push(WorstMarginRow {
                    t,
                    task,
                    adaptive: fold(&|s| s.0[k].1),
                    baseline: fold(&|s| s.1[k].1),
                });
            }
        }
        rows
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::fmt::Write as _;
        let mut out = String::from("t,task_id,adaptive,baseline\n");
        for r in self.worst_margins() {
            writeln!(out, "{},{},{},{}", r.t, r.task, r.adaptive, r.baseline).unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Longest time, in seconds, a margin may stay below `−ε` after the latest
/// fault before the run counts as not recovering.
pub const RECOVERY_HORIZON: f64 = 10.0;

/// Times at which faults show up in a run: timed disturbances switching on,
/// and allocated robots whose discrepancy crosses the exclusion threshold.
/// Standing zones only act once a robot enters them, which the second kind
/// captures.
pub fn fault_times(trace: &SimTrace, config: &ScenarioConfig) -> Vec<f64> {
    let mut times: Vec<f64> = config
        .disturbances
        .iter()
        .filter(|d| d.start > 0.0)
        .map(|d| d.start)
        .chain(
            trace
                .events
                .iter()
                .filter(|e| matches!(e.kind, EventKind::RobotImpaired { .. }))
                .map(|e| e.t),
        )
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

/// Slowest recovery of `task`, in seconds: over every stretch where its worst
/// margin is below `−eps`, the time from the later of the stretch start and
/// the last fault inside it to the end of the stretch. A stretch still open
/// at the end of the run counts as infinite.
pub fn slowest_recovery(trace: &SimTrace, faults: &[f64], task: usize, eps: f64) -> f64 {
    let mut slowest = 0.0f64;
    let mut start: Option<f64> = None;
    for (t, v) in trace.worst_margin_series(task) {
        match (v < -eps, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                let latest = faults.iter().filter(|&&f| f >= s && f < t).fold(s, |a, &f| a.max(f));
                slowest = slowest.max(t - latest);
                start = None;
            }
            _ => {}
        }
    }
    if start.is_some() {
        f64::INFINITY
    } else {
        slowest
    }
}

/// Whether, after every fault, the worst margin of each of `tasks` returns
/// to at least `−eps` within `horizon` seconds, and the run ends with every
/// such margin at least `−eps`.
pub fn recovers_after_faults(
    trace: &SimTrace,
    config: &ScenarioConfig,
    tasks: &[usize],
    eps: f64,
    horizon: f64,
) -> bool {
    let faults = fault_times(trace, config);
    tasks.iter().all(|&m| slowest_recovery(trace, &faults, m, eps) <= horizon)
}

/// Whether the worst margin of some task in `tasks` stays below `−eps` over
/// the whole final `window` seconds of the run.
pub fn persistently_negative(trace: &SimTrace, tasks: &[usize], eps: f64, window: f64) -> bool {
    tasks.iter().any(|&m| {
        let s = trace.worst_margin_series(m);
        let Some(&(end, _)) = s.last() else {
            return false;
        };
        s.iter().filter(|(t, _)| *t >= end - window).all(|&(_, v)| v < -eps)
    })
}

/// Tolerance `ε`: 5% of the largest requirement entry of `tasks`.
pub fn margin_tolerance(config: &ScenarioConfig, tasks: &[usize]) -> f64 {
    let largest = tasks
        .iter()
        .flat_map(|&m| config.tasks[m].requirements.iter().flatten())
        .fold(0.0f64, |a, &b| a.max(b));
    0.05 * largest
}
