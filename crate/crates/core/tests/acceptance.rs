//! End-to-end acceptance checks. Runs without the test harness so every
//! criterion prints one PASS/FAIL line; exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resalloc::allocator::{oracle_check, solve, suite_instance, InstanceLimits, SolveOptions};
use resalloc::degradation::update_degradation;
use resalloc::geometry::{Point, Rect, Trajectory};
use resalloc::sim::*;
use resalloc::tasks::{
    gradient_controller, predicted_task_value, robot_task_value, Density, DisturbanceKind, DisturbanceSpec, Scope,
    TaskFrame, TaskKind,
};

type Verdict = (bool, String);

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("multiplicative disturbance identity", disturbance_identity),
        ("example 2 degradation", example2_degradation),
        ("mobility-failure reconfiguration", mobility_failure),
        ("graceful degradation", graceful_degradation),
        ("event-trigger economy", trigger_economy),
        ("reallocation contrast", reallocation_contrast),
        ("parameter robustness", parameter_robustness),
        ("solver scaling", solver_scaling),
        ("numerical hygiene", numerical_hygiene),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = check();
        failed += usize::from(!ok);
        println!(
            "criterion {:2} {}: {name} ({detail}) [{:.1} s]",
            k + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn oracle_equivalence() -> Verdict {
    let exact = SolveOptions {
        gap_tol: 0.0,
        ..SolveOptions::default()
    };
    let report = oracle_check(100, 0, InstanceLimits::default(), &exact, 1e-9).unwrap();
    (
        report.passed(),
        format!(
            "{} instances, {} mismatches, {} replay failures",
            report.instances,
            report.mismatches.len(),
            report.replay_failures.len()
        ),
    )
}

/// A single goal-tracking robot under a constant control multiplier.
fn lone_robot(w: f64) -> ScenarioConfig {
    let mut c = example1();
    c.team.counts = vec![1, 0];
    c.team.positions = vec![[-8.0, -6.0]];
    c.tasks[0].kind = TaskKind::GoalTracking {
        goal: Trajectory::stationary(Point::zeros()),
    };
    c.disturbances = vec![DisturbanceSpec {
        kind: DisturbanceKind::ControlMultiplier,
        magnitude: w,
        start: 0.0,
        end: f64::INFINITY,
        ramp: 0.0,
        scope: Scope::default(),
    }];
    c.sim.trigger = false;
    c
}

fn disturbance_identity() -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for w in [0.1, 0.2, 0.3] {
        let trace = run_scenario(&lone_robot(w), &RunOptions::default()).unwrap();
        let dv: Vec<f64> = trace.robot_series(0).filter(|r| r.t >= 0.5).map(|r| r.dv).collect();
        let worst = dv.iter().map(|v| (v - w).abs()).fold(0.0, f64::max);
        ok &= worst <= 0.02;
        detail.push(format!("w={w}: max |dV-w|={worst:.4}"));
    }
    let config = example1();
    let trace = run_scenario(&config, &RunOptions::default()).unwrap();
    let leader = trace.robot_series(0).map(|r| r.dv).fold(0.0, f64::max);
    let follower = trace.robot_series(1).last().unwrap().dv_smoothed;
    ok &= leader <= 0.02 && (follower - 0.3).abs() <= 0.02;
    detail.push(format!("example 1: leader max dV={leader:.4}, follower smoothed dV={follower:.4}"));
    (ok, detail.join("; "))
}

fn example2_degradation() -> Verdict {
    let trace = run_scenario(&example2(), &RunOptions::default()).unwrap();
    let d: Vec<f64> = (0..3).map(|u| trace.degradation_series(0, u).last().unwrap().1).collect();
    let expected = [0.15, 0.0, 0.3];
    let ok = (d[0] - expected[0]).abs() <= 0.05
        && d[1].abs() <= 0.01
        && (d[2] - expected[2]).abs() <= 0.05
        && d[2] > d[0]
        && d[0] > d[1];
    (ok, format!("d = [{:.3}, {:.3}, {:.3}]", d[0], d[1], d[2]))
}

struct Mission {
    config: ScenarioConfig,
    trace: SimTrace,
}

fn desk() -> &'static Mission {
    static MISSION: std::sync::OnceLock<Mission> = std::sync::OnceLock::new();
    MISSION.get_or_init(|| {
        let config = coverage_tracking();
        let trace = run_scenario(&config, &RunOptions::default()).unwrap();
        Mission { config, trace }
    })
}

fn disturbance_start(config: &ScenarioConfig, kind: DisturbanceKind) -> f64 {
    config.disturbances.iter().find(|d| d.kind == kind).map(|d| d.start).unwrap()
}

fn allocations(trace: &SimTrace) -> Vec<(f64, Vec<Option<usize>>, Vec<usize>, Vec<bool>)> {
    trace
        .events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::AllocationApplied {
                assignment,
                configs,
                relaxed,
            } => Some((e.t, assignment.clone(), configs.clone(), relaxed.clone())),
            _ => None,
        })
        .collect()
}

/// Smallest worst-case margin of `task` over `[from, to]`.
fn min_margin(trace: &SimTrace, task: usize, from: f64, to: f64) -> f64 {
    trace
        .worst_margin_series(task)
        .into_iter()
        .filter(|(t, _)| *t >= from && *t <= to)
        .map(|(_, v)| v)
        .fold(f64::INFINITY, f64::min)
}

fn mobility_failure() -> Verdict {
    let Mission { config, trace } = desk();
    let friction = disturbance_start(config, DisturbanceKind::FrictionZone);
    let fog = disturbance_start(config, DisturbanceKind::SensingFog);
    let species = config.species_of();
    let allocs = allocations(trace);
    // The ground robot that follows target 2 into the friction zone.
    let stuck = (0..species.len())
        .find(|&i| species[i] == GROUND && allocs[0].1[i] == Some(1))
        .unwrap();
    let later: Vec<_> = allocs.iter().skip(1).take(3).collect();
    let Some(switch) = later.iter().find(|a| a.2[1] == 1) else {
        return (false, "task 2 never switched to its second configuration".into());
    };
    let switch_t = switch.0;
    // Once the switch has settled, both tracking tasks hold their margins
    // until the fog.
    let settle = trace
        .worst_margin_series(1)
        .into_iter()
        .rev()
        .filter(|(t, _)| *t < fog)
        .take_while(|(_, v)| *v >= -1e-9)
        .last()
        .map(|(t, _)| t)
        .unwrap_or(f64::INFINITY);
    let dipped = min_margin(trace, 1, friction, switch_t + 5.0) < 0.0;
    let held = (0..2).all(|m| min_margin(trace, m, settle, fog) >= -1e-9);
    let dv_end = trace.robot_series(stuck).last().unwrap().dv_smoothed;
    let crossed = trace
        .robot_series(stuck)
        .find(|r| r.dv_smoothed > config.sim.dv_thresh)
        .map(|r| r.t);
    let excluded = crossed.is_some_and(|tc| {
        allocs.iter().filter(|a| a.0 >= tc).all(|a| a.1[stuck].is_none())
            && trace.robot_series(stuck).filter(|r| r.t >= tc).all(|r| r.task.is_none())
    });
    let ok = dipped && held && settle < fog && excluded && switch.1[stuck].is_none();
    (
        ok,
        format!(
            "switch at {switch_t:.2} s, margins back at {settle:.2} s, robot {stuck} final smoothed dV {dv_end:.3}, excluded {excluded}"
        ),
    )
}

fn graceful_degradation() -> Verdict {
    let Mission { config, trace } = desk();
    let fog = disturbance_start(config, DisturbanceKind::SensingFog);
    let Some(solve_at) = trace.events.iter().position(|e| e.t >= fog && matches!(e.kind, EventKind::MiqpSolved { .. }))
    else {
        return (false, "no solve after the fog".into());
    };
    let event = &trace.events[solve_at];
    let EventKind::MiqpSolved { margins, .. } = &event.kind else { unreachable!() };
    let Some((_, _, _, relaxed)) = allocations(trace).into_iter().find(|a| a.0 == event.t) else {
        return (false, "solve produced no allocation".into());
    };
    // Idle robots still eligible for work when the fog solve runs.
    let spare = trace
        .robots
        .iter()
        .filter(|r| r.tick + 1 == event.tick && r.task.is_none() && r.dv_smoothed <= config.sim.dv_thresh)
        .count();
    let min_row = |m: usize| margins[m].iter().copied().fold(f64::INFINITY, f64::min);
    let tracking = min_row(0).min(min_row(1));
    let coverage = min_row(2);
    let end = config.sim.duration;
    let coverage_run = min_margin(trace, 2, fog, end);
    let final_tracking = (0..2).map(|m| trace.worst_margin_series(m).last().unwrap().1).fold(f64::INFINITY, f64::min);
    let ok = spare == 0 && relaxed[2] && coverage < 0.0 && tracking >= -1e-9 && coverage_run < 0.0 && final_tracking >= -1e-9;
    (
        ok,
        format!(
            "solve at {:.2} s, spare robots {spare}, task 3 relaxed {}; solved margins: tasks 1-2 min {tracking:.2e}, task 3 min {coverage:.2}; run: task 3 min {coverage_run:.2}, tasks 1-2 final {final_tracking:.2e}",
            event.t, relaxed[2]
        ),
    )
}

fn trigger_economy() -> Verdict {
    let Mission { trace, .. } = desk();
    let mut calm = coverage_tracking();
    calm.disturbances.clear();
    let quiet = run_scenario(&calm, &RunOptions::default()).unwrap();
    let ok = quiet.summary.solves == 1 && trace.summary.solves <= 5 && trace.summary.ticks >= 1000;
    (
        ok,
        format!(
            "calm run {} solve(s); full run {} solves over {} ticks",
            quiet.summary.solves, trace.summary.solves, trace.summary.ticks
        ),
    )
}

fn tracking(config: &ScenarioConfig) -> Vec<usize> {
    resalloc::cli::tracking_tasks(&config.tasks)
}

fn batch(randomize: Randomize) -> (ScenarioConfig, TrialReport) {
    let base = coverage_tracking_large();
    let options = RunOptions {
        events_only: true,
        ..RunOptions::default()
    };
    let report = randomized_trials(&base, 20, randomize, &options).unwrap();
    (base, report)
}

fn reallocation_contrast() -> Verdict {
    let (base, report) = batch(Randomize::Env);
    let tasks = tracking(&base);
    let eps = margin_tolerance(&base, &tasks);
    let team = base.team.counts.clone();
    let recovered = report
        .outcomes
        .iter()
        .filter(|o| recovers_after_faults(&o.adaptive, &o.config, &tasks, eps, RECOVERY_HORIZON))
        .count();
    let negative = report
        .outcomes
        .iter()
        .filter(|o| persistently_negative(&o.baseline, &tasks, eps, RECOVERY_HORIZON))
        .count();
    let n = report.outcomes.len();
    let ok = n == 20 && team == vec![32, 8] && recovered == n && negative == n;
    (
        ok,
        format!("team {team:?}, eps {eps:.2}: {recovered}/{n} recover, {negative}/{n} baselines persistently negative"),
    )
}

fn parameter_robustness() -> Verdict {
    let (base, report) = batch(Randomize::Params);
    let tasks = tracking(&base);
    let eps = margin_tolerance(&base, &tasks);
    let failing: Vec<u64> = report
        .outcomes
        .iter()
        .filter(|o| !recovers_after_faults(&o.adaptive, &o.config, &tasks, eps, RECOVERY_HORIZON))
        .map(|o| o.index)
        .collect();
    let n = report.outcomes.len();
    let recovered = n - failing.len();
    (recovered >= 18, format!("{recovered}/{n} recover; failing trials {failing:?}"))
}

fn solver_scaling() -> Verdict {
    let problem = scaled_problem(40);
    let options = SolveOptions {
        gap_tol: 1e-6,
        ..SolveOptions::default()
    };
    let mut times = Vec::new();
    let mut certified = true;
    for _ in 0..5 {
        let start = Instant::now();
        let s = solve(&problem, &options).unwrap();
        times.push(start.elapsed().as_secs_f64());
        certified &= !s.stats.node_limit_hit && s.stats.gap <= 1e-6 * s.objective.abs().max(1.0);
        certified &= problem.check_solution(&s).is_ok();
    }
    times.sort_by(f64::total_cmp);
    let median = times[times.len() / 2];
    (
        certified && median <= 10.0,
        format!(
            "N={}, M={}, U={}: median {:.3} s, certified {certified}",
            problem.num_robots(),
            problem.num_tasks(),
            problem.num_capabilities(),
            median
        ),
    )
}

fn numerical_hygiene() -> Verdict {
    let gradients = gradient_error();
    let convergence = closed_form_error();
    let mut replay_ok = true;
    for k in 0..200 {
        let p = suite_instance(99, k, InstanceLimits::default());
        if let Ok(s) = solve(&p, &SolveOptions::default()) {
            replay_ok &= p.check_solution(&s).is_ok();
        }
    }
    {
        let trace = &desk().trace;
        replay_ok &= trace.summary.failed_solves == 0;
    }
    (
        gradients <= 1e-5 && convergence <= 1e-6 && replay_ok,
        format!("max gradient rel. error {gradients:.1e}, closed-form error {convergence:.1e}, replay ok {replay_ok}"),
    )
}

/// Largest relative error between analytic partials (recovered from the
/// controller and the one-step prediction) and central differences.
fn gradient_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let goal = Trajectory::stationary(Point::zeros());
    let kinds = [
        TaskKind::GoalTracking { goal: goal.clone() },
        TaskKind::Follower {
            goal: goal.clone(),
            distance: 1.2,
        },
        TaskKind::TargetTracking {
            target: goal,
            desired_sq_distance: 2.0,
            spacing: 1.5,
        },
        TaskKind::Coverage {
            domain: Rect::new(-3.0, -3.0, 3.0, 3.0),
            density: Density::Uniform,
        },
    ];
    let members = [0, 1, 2];
    let mut worst: f64 = 0.0;
    for kind in &kinds {
        for _ in 0..100 {
            let mut point = || Point::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let positions: Vec<Point> = (0..3).map(|_| point()).collect();
            let centroids: Vec<Option<Point>> = (0..3).map(|_| Some(point() * 0.5)).collect();
            let reference = point() * 0.5;
            let sensing: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
            let robot = rng.gen_range(0..3);
            let frame = |positions: &[Point], reference: Point| -> f64 {
                let f = TaskFrame {
                    members: &members,
                    positions,
                    sensing: &sensing,
                    reference,
                    centroids: &centroids,
                };
                robot_task_value(kind, robot, &f).unwrap()
            };
            let f = TaskFrame {
                members: &members,
                positions: &positions,
                sensing: &sensing,
                reference,
                centroids: &centroids,
            };
            let v0 = robot_task_value(kind, robot, &f).unwrap();
            let h = 1e-6;
            // wrt = Some(r): robot r's position; None: the reference.
            for wrt in [Some(0), Some(1), Some(2), None] {
                let mut analytic = Point::zeros();
                let mut numeric = Point::zeros();
                for axis in 0..2 {
                    let mut e = Point::zeros();
                    e[axis] = 1.0;
                    let mut vel = vec![Point::zeros(); 3];
                    let mut ref_vel = Point::zeros();
                    match wrt {
                        Some(r) => vel[r] = e,
                        None => ref_vel = e,
                    }
                    let dt = 1.0;
                    analytic[axis] = predicted_task_value(kind, robot, &f, &vel, ref_vel, dt).unwrap() - v0;
                    let (mut plus, mut minus) = (positions.clone(), positions.clone());
                    let (mut rp, mut rm) = (reference, reference);
                    match wrt {
                        Some(r) => {
                            plus[r][axis] += h;
                            minus[r][axis] -= h;
                        }
                        None => {
                            rp[axis] += h;
                            rm[axis] -= h;
                        }
                    }
                    numeric[axis] = (frame(&plus, rp) - frame(&minus, rm)) / (2.0 * h);
                }
                worst = worst.max((analytic - numeric).norm() / (1.0 + analytic.norm().max(numeric.norm())));
                if wrt == Some(robot) {
                    let u = gradient_controller(kind, robot, &f, 1.0).unwrap();
                    worst = worst.max((u + analytic).norm() / (1.0 + analytic.norm()));
                }
            }
        }
    }
    worst
}

/// Error of the degradation update against its geometric closed form, and
/// of the final state against the fixed point.
fn closed_form_error() -> f64 {
    let dt = 0.01;
    let star = DVector::from_vec(vec![0.15, 0.0, 0.3]);
    let d0 = DVector::from_vec(vec![0.9, 0.4, 0.0]);
    let theta = DVector::from_element(3, 1.0);
    let mut d = d0.clone();
    let mut worst: f64 = 0.0;
    for k in 1..=2000 {
        d = update_degradation(&d, &star, &theta, dt);
        let closed = &star + (&d0 - &star) * (1.0 - dt).powi(k);
        worst = worst.max((&d - closed).amax());
    }
    worst.max((&d - &star).amax())
}
