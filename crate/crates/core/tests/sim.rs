//! End-to-end behavior of the simulation loop.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use resalloc::allocator::{AllocationSolution, SolverStats};
use resalloc::geometry::Point;
use resalloc::sim::*;
use resalloc::tasks::RobotState;

fn desk() -> &'static SimTrace {
    static TRACE: OnceLock<SimTrace> = OnceLock::new();
    TRACE.get_or_init(|| run_scenario(&coverage_tracking(), &RunOptions::default()).unwrap())
}

fn applied(trace: &SimTrace) -> Vec<(u64, Vec<Option<usize>>)> {
    trace
        .events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::AllocationApplied { assignment, .. } => Some((e.tick, assignment.clone())),
            _ => None,
        })
        .collect()
}

fn solution(assignment: Vec<Option<usize>>, configs: Vec<usize>, relaxed: Vec<bool>) -> AllocationSolution {
    let m = configs.len();
    AllocationSolution {
        assignment,
        configs,
        relaxed,
        margins: DMatrix::zeros(m, 1),
        objective: 0.0,
        stats: SolverStats::default(),
    }
}

#[test]
fn runs_are_bit_identical() {
    let config = example2();
    let a = run_scenario(&config, &RunOptions::default()).unwrap();
    let b = run_scenario(&config, &RunOptions::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a.events).unwrap(), serde_json::to_string(&b.events).unwrap());
}

#[test]
fn allocation_takes_effect_on_the_next_tick() {
    let trace = desk();
    let applied = applied(trace);
    for row in &trace.robots {
        // The initial allocation is in place before the first tick.
        let (_, current) = applied
            .iter()
            .enumerate()
            .filter(|(k, (tick, _))| *k == 0 || *tick < row.tick)
            .map(|(_, a)| a)
            .next_back()
            .unwrap();
        assert_eq!(row.task, current[row.robot], "robot {} at tick {}", row.robot, row.tick);
    }
}

#[test]
fn excluded_robots_stay_idle() {
    let trace = desk();
    let thresh = coverage_tracking().sim.dv_thresh;
    let applied = applied(trace);
    for robot in 0..trace.num_robots {
        let Some(first) = trace.robot_series(robot).find(|r| r.dv_smoothed > thresh) else {
            continue;
        };
        for row in trace.robot_series(robot).filter(|r| r.tick >= first.tick) {
            assert!(row.dv_smoothed > thresh);
        }
        for (tick, assignment) in applied.iter().filter(|(t, _)| *t >= first.tick) {
            assert_eq!(assignment[robot], None, "robot {robot} reallocated at tick {tick}");
        }
    }
}

#[test]
fn every_resolve_follows_a_trigger() {
    let trace = desk();
    let mut last_t = 0.0;
    for (k, event) in trace.events.iter().enumerate() {
        assert!(event.t >= last_t);
        last_t = event.t;
        if matches!(event.kind, EventKind::MiqpSolved { .. }) && event.tick > 0 {
            let trigger = trace.events[..k]
                .iter()
                .rev()
                .find(|e| matches!(e.kind, EventKind::TriggerFired { .. }))
                .expect("trigger before solve");
            assert_eq!(trigger.tick, event.tick);
        }
    }
}

#[test]
fn desk_mission_resolves_a_few_times() {
    let trace = desk();
    assert!(trace.summary.solves >= 2, "{}", trace.summary.solves);
    assert!(trace.summary.solves <= 5, "{}", trace.summary.solves);
    assert_eq!(trace.summary.solves, trace.solve_ticks().len());
}

#[test]
fn calm_mission_solves_once() {
    let mut config = coverage_tracking();
    config.disturbances.clear();
    let trace = run_scenario(&config, &RunOptions::default()).unwrap();
    assert_eq!(trace.summary.solves, 1);
}

#[test]
fn disabled_trigger_still_logs_impairment() {
    let mut config = coverage_tracking();
    config.sim.trigger = false;
    let trace = run_scenario(&config, &RunOptions::default()).unwrap();
    assert_eq!(trace.summary.solves, 1);
    assert!(trace.events.iter().any(|e| matches!(e.kind, EventKind::RobotImpaired { .. })));
    assert!(!trace.events.iter().any(|e| matches!(e.kind, EventKind::TriggerFired { .. })));
}

#[test]
fn events_only_keeps_margins() {
    let options = RunOptions {
        events_only: true,
        ..RunOptions::default()
    };
    let full = run_scenario(&example1(), &RunOptions::default()).unwrap();
    let lean = run_scenario(&example1(), &options).unwrap();
    assert!(lean.robots.is_empty() && lean.degradation.is_empty());
    assert_eq!(lean.margins, full.margins);
    assert_eq!(lean.events, full.events);
}

#[test]
fn reassignment_charges_the_cost_difference() {
    let costs = [4.0, 10.0];
    let mut robots: Vec<RobotState> = (0..3).map(|_| RobotState::new(Point::zeros(), 0)).collect();
    robots[0].task = Some(0);
    robots[1].task = Some(1);
    let mut current = Allocation {
        assignment: vec![Some(0), Some(1), None],
        configs: vec![0, 0],
        relaxed: vec![false, false],
    };
    let next = solution(vec![Some(1), None, None], vec![0, 1], vec![true, false]);
    let events = apply_allocation(&next, &mut robots, &mut current, &costs);
    assert_eq!(
        events,
        vec![
            EventKind::Reassigned { robot: 0, from: Some(0), to: Some(1), transition_cost: 6.0 },
            EventKind::Reassigned { robot: 1, from: Some(1), to: None, transition_cost: 10.0 },
            EventKind::ConfigurationSwitched { task: 1, from: 0, to: 1 },
            EventKind::TaskRelaxed { task: 0, relaxed: true },
        ]
    );
    assert_eq!(robots.iter().map(|r| r.task).collect::<Vec<_>>(), next.assignment);
    assert!(apply_allocation(&next, &mut robots, &mut current, &costs).is_empty());
}

#[test]
fn empty_allocation_idles_everyone() {
    let mut robots: Vec<RobotState> = (0..4).map(|i| RobotState::new(Point::zeros(), i % 2)).collect();
    for (i, r) in robots.iter_mut().enumerate() {
        r.task = Some(i % 2);
    }
    let mut current = Allocation::idle(4, 2);
    let events = apply_allocation(&solution(vec![None; 4], vec![0, 0], vec![false; 2]), &mut robots, &mut current, &[1.0, 2.0]);
    assert_eq!(events.len(), 4);
    assert!(robots.iter().all(|r| r.task.is_none()));
    assert_eq!(current, Allocation::idle(4, 2));
}
