use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::allocator::{solve, AllocationProblem, SolveOptions};
use crate::geometry::{Point, Rect, Trajectory};
use crate::tasks::{Density, DisturbanceKind, DisturbanceSpec, Scope, TaskKind};
use crate::team::{CapabilityMatrix, SpeciesMapping};

use super::config::{ScenarioConfig, SimParams, TaskConfig, TeamConfig};

pub const AERIAL: usize = 0;
pub const GROUND: usize = 1;

/// Capability rows of the aerial and ground platforms: perception (m²),
/// resolution (m), air speed (m/s), ground speed (m/s), communication (Mb/s).
pub const TEAM_Q: [[f64; 5]; 2] = [[5.0, 1.0, 3.0, 0.0, 5.0], [2.0, 3.0, 0.0, 1.0, 8.0]];

const CAPABILITIES: [&str; 5] = ["perception", "resolution", "air speed", "ground speed", "communication"];

/// Names of the built-in scenarios.
pub const BUILTIN: [&str; 4] = ["example1", "example2", "coverage_tracking", "coverage_tracking_large"];

pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    BUILTIN.iter().map(|n| builtin(n).expect("known scenario")).collect()
}

pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    match name {
        "example1" => Some(example1()),
        "example2" => Some(example2()),
        "coverage_tracking" => Some(coverage_tracking()),
        "coverage_tracking_large" => Some(coverage_tracking_large()),
        _ => None,
    }
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// A ground leader tracks a goal while an aerial follower keeps its
/// distance; from 0.66 s a head wind ramps the follower's control
/// multiplier up to 0.3.
pub fn example1() -> ScenarioConfig {
    ScenarioConfig {
        name: "example1".into(),
        seed: 0,
        team: TeamConfig {
            species: names(&["ground", "aerial"]),
            capabilities: names(&["perception", "ground speed", "air speed"]),
            q: vec![vec![10.0, 2.0, 0.0], vec![10.0, 0.0, 5.0]],
            counts: vec![1, 1],
            deployment_costs: vec![0.0, 0.0],
            positions: vec![[0.0, 0.0], [-8.0, -6.0]],
        },
        tasks: vec![TaskConfig {
            name: "lead and follow".into(),
            kind: TaskKind::Follower {
                goal: Trajectory::stationary(Point::zeros()),
                distance: 2.0,
            },
            requirements: vec![vec![20.0, 2.0, 5.0]],
            weight: 1.0,
            transition_cost: 0.0,
            gain: None,
        }],
        disturbances: vec![DisturbanceSpec {
            kind: DisturbanceKind::ControlMultiplier,
            magnitude: 0.3,
            start: 0.66,
            end: f64::INFINITY,
            ramp: 0.5,
            scope: Scope {
                robots: Some(vec![1]),
                ..Scope::default()
            },
        }],
        sim: SimParams {
            dt: 0.01,
            duration: 5.0,
            chi: 0.33,
            dv_thresh: 0.9,
            balance_weight: 1.0,
            delta_max: 1000.0,
            gain: 1.0,
            coverage_resolution: 20,
            max_speed: None,
            trigger: true,
        },
    }
}

/// Example 1 run long enough for the degradation to settle.
pub fn example2() -> ScenarioConfig {
    let mut c = example1();
    c.name = "example2".into();
    c.sim.duration = 8.0;
    c
}

/// Geometry and timing of the coverage-and-tracking mission.
#[derive(Debug, Clone)]
pub struct MissionLayout {
    pub aerial: usize,
    pub ground: usize,
    pub tracking_requirements: Vec<Vec<f64>>,
    pub coverage_requirements: Vec<Vec<f64>>,
    /// Squared ring radius `d_k` and spacing `d_0` of the tracking tasks.
    pub ring_sq: f64,
    pub spacing: f64,
    pub tracking_gain: f64,
    pub coverage_domain: Rect,
    pub coverage_sigma: f64,
    pub target1: Point,
    pub target2_start: Point,
    pub target2_end: Point,
    /// Target 2 travels between these times.
    pub target2_move: (f64, f64),
    pub friction_region: Rect,
    /// Fog on task 2: start, end and `e` growth rate.
    pub fog: (f64, f64, f64),
    pub base: Point,
    pub duration: f64,
}

impl MissionLayout {
    pub fn desk() -> Self {
        MissionLayout {
            aerial: 8,
            ground: 2,
            tracking_requirements: vec![
                vec![7.0, 4.0, 3.0, 1.0, 10.0],
                vec![10.5, 2.1, 6.3, 0.0, 10.5],
            ],
            coverage_requirements: vec![vec![20.0, 4.0, 12.0, 0.0, 15.0]],
            ring_sq: 4.0,
            spacing: 4.0,
            tracking_gain: 0.05,
            coverage_domain: Rect::new(-4.0, -4.0, 4.0, 4.0),
            coverage_sigma: 2.0,
            target1: Point::new(-10.0, 0.0),
            target2_start: Point::new(10.0, 0.0),
            target2_end: Point::new(10.0, -14.0),
            target2_move: (8.0, 14.0),
            friction_region: Rect::new(6.0, -20.0, 14.0, -5.0),
            fog: (27.0, 27.6, 1.0),
            base: Point::new(0.0, -10.0),
            duration: 60.0,
        }
    }

    pub fn large() -> Self {
        MissionLayout {
            aerial: 32,
            ground: 8,
            tracking_requirements: vec![
                vec![28.0, 16.0, 12.0, 4.0, 52.0],
                vec![38.0, 8.0, 24.0, 0.0, 38.0],
            ],
            coverage_requirements: vec![vec![80.0, 16.0, 48.0, 0.0, 80.0]],
            ring_sq: 16.0,
            spacing: 4.0 * (12.0f64 / 63.0).sqrt(),
            tracking_gain: 0.01,
            coverage_domain: Rect::new(-8.0, -8.0, 8.0, 8.0),
            coverage_sigma: 4.0,
            target1: Point::new(-20.0, 0.0),
            target2_start: Point::new(20.0, 0.0),
            target2_end: Point::new(20.0, -12.0),
            target2_move: (8.0, 20.0),
            friction_region: Rect::new(12.0, -24.0, 28.0, -8.0),
            fog: (35.0, 35.6, 1.0),
            base: Point::new(0.0, -20.0),
            duration: 60.0,
        }
    }
}

/// Two target-tracking tasks and one coverage task with the §IV weights,
/// a ground-only friction zone on target 2's path and a fog bank over
/// task 2. Robots start on station for the initial allocation; idle
/// robots wait at the base.
pub fn mission(name: &str, layout: &MissionLayout) -> ScenarioConfig {
    let (t0, t1) = layout.target2_move;
    let tracking = |target: Trajectory| TaskKind::TargetTracking {
        target,
        desired_sq_distance: layout.ring_sq,
        spacing: layout.spacing,
    };
    let tasks = vec![
        TaskConfig {
            name: "track target 1".into(),
            kind: tracking(Trajectory::stationary(layout.target1)),
            requirements: layout.tracking_requirements.clone(),
            weight: 100.0,
            transition_cost: 65.0,
            gain: Some(layout.tracking_gain),
        },
        TaskConfig {
            name: "track target 2".into(),
            kind: tracking(
                Trajectory::new(vec![
                    [t0, layout.target2_start.x, layout.target2_start.y],
                    [t1, layout.target2_end.x, layout.target2_end.y],
                ])
                .expect("sorted"),
            ),
            requirements: layout.tracking_requirements.clone(),
            weight: 100.0,
            transition_cost: 18.0,
            gain: Some(layout.tracking_gain),
        },
        TaskConfig {
            name: "monitor".into(),
            kind: TaskKind::Coverage {
                domain: layout.coverage_domain,
                density: Density::Gaussian {
                    sigma: layout.coverage_sigma,
                },
            },
            requirements: layout.coverage_requirements.clone(),
            weight: 10.0,
            transition_cost: 45.0,
            gain: None,
        },
    ];
    let disturbances = vec![
        DisturbanceSpec {
            kind: DisturbanceKind::FrictionZone,
            magnitude: 1.0,
            start: 0.0,
            end: f64::INFINITY,
            ramp: 0.0,
            scope: Scope {
                species: Some(vec![GROUND]),
                region: Some(layout.friction_region),
                ..Scope::default()
            },
        },
        DisturbanceSpec {
            kind: DisturbanceKind::SensingFog,
            magnitude: layout.fog.2,
            start: layout.fog.0,
            end: layout.fog.1,
            ramp: 0.0,
            scope: Scope {
                task: Some(1),
                ..Scope::default()
            },
        },
    ];
    let mut config = ScenarioConfig {
        name: name.into(),
        seed: 0,
        team: TeamConfig {
            species: names(&["aerial", "ground"]),
            capabilities: names(&CAPABILITIES),
            q: TEAM_Q.iter().map(|r| r.to_vec()).collect(),
            counts: vec![layout.aerial, layout.ground],
            deployment_costs: vec![0.1, 0.1],
            positions: Vec::new(),
        },
        tasks,
        disturbances,
        sim: SimParams {
            dt: 0.05,
            duration: layout.duration,
            chi: 0.33,
            dv_thresh: 0.9,
            balance_weight: 1.0,
            delta_max: 1000.0,
            gain: 1.0,
            coverage_resolution: 30,
            max_speed: Some(3.0),
            trigger: true,
        },
    };
    config.team.positions = station_positions(&config, layout.base)
        .iter()
        .map(|p| [p.x, p.y])
        .collect();
    config
}

pub fn coverage_tracking() -> ScenarioConfig {
    mission("coverage_tracking", &MissionLayout::desk())
}

pub fn coverage_tracking_large() -> ScenarioConfig {
    mission("coverage_tracking_large", &MissionLayout::large())
}

/// Evenly spaced points on a circle.
pub fn ring(center: Point, radius: f64, n: usize, phase: f64) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let a = phase + 2.0 * PI * k as f64 / n as f64;
            center + Point::new(radius * a.cos(), radius * a.sin())
        })
        .collect()
}

/// Starting positions: members of the initial allocation sit on station
/// (on the tracking ring, or spread over the coverage domain); everyone
/// else lines up at `base`.
pub fn station_positions(config: &ScenarioConfig, base: Point) -> Vec<Point> {
    let n = config.num_robots();
    let problem = initial_problem(config);
    let assignment = solve(&problem, &SolveOptions::default())
        .map(|s| s.assignment)
        .unwrap_or_else(|_| vec![None; n]);
    let mut positions: Vec<Point> = (0..n)
        .map(|i| base + Point::new(1.5 * (i as f64 - (n as f64 - 1.0) / 2.0), 0.0))
        .collect();
    for (m, task) in config.tasks.iter().enumerate() {
        let members: Vec<usize> = (0..n).filter(|&i| assignment[i] == Some(m)).collect();
        let spots = match &task.kind {
            TaskKind::TargetTracking {
                target,
                desired_sq_distance,
                ..
            } => ring(target.position(0.0), desired_sq_distance.sqrt(), members.len(), PI / 2.0),
            TaskKind::Coverage { domain, .. } => {
                let c = Point::new(
                    0.5 * (domain.min[0] + domain.max[0]),
                    0.5 * (domain.min[1] + domain.max[1]),
                );
                ring(c, 0.25 * domain.width().min(domain.height()), members.len(), PI / 4.0)
            }
            other => {
                let g = other.reference(0.0, config.sim.dt).map_or(base, |r| r.0);
                vec![g; members.len()]
            }
        };
        for (&i, p) in members.iter().zip(spots) {
            positions[i] = p;
        }
    }
    positions
}

/// The allocation problem posed at `t = 0`: no degradation, nobody
/// previously allocated.
pub fn initial_problem(config: &ScenarioConfig) -> AllocationProblem {
    let n = config.num_robots();
    let q = config.capability_matrix().expect("valid team");
    let u = q.num_capabilities();
    AllocationProblem {
        capabilities: q,
        species: config.species_mapping().expect("valid team"),
        requirements: config.requirement_matrices(),
        degradation: DMatrix::zeros(config.num_tasks(), u),
        task_weights: config.tasks.iter().map(|t| t.weight).collect(),
        species_costs: config.team.deployment_costs.clone(),
        transition_costs: config.tasks.iter().map(|t| t.transition_cost).collect(),
        previous: vec![None; n],
        discrepancy: vec![0.0; n],
        relaxation_penalty: config.sim.balance_weight,
        delta_max: config.sim.delta_max,
        dv_thresh: config.sim.dv_thresh,
    }
}

/// The mission's allocation problem scaled to `n` robots, one in five
/// ground, with requirements grown as `n / 10`. It is posed mid-mission:
/// the team holds the nominal allocation (tracking with one aerial and one
/// ground robot per ten, coverage with four aerial per ten) and task 2's
/// ground mobility has degraded, so the solver must reconfigure task 2.
pub fn scaled_problem(n: usize) -> AllocationProblem {
    let ground = if n >= 2 { (n / 5).max(1) } else { 0 };
    let aerial = n - ground;
    let scale = n as f64 / 10.0;
    let tracking = DMatrix::from_row_slice(
        2,
        5,
        &[7.0, 4.0, 3.0, 1.0, 10.0, 10.5, 2.1, 6.3, 0.0, 10.5],
    ) * scale;
    let coverage = DMatrix::from_row_slice(1, 5, &[20.0, 4.0, 12.0, 0.0, 15.0]) * scale;
    let species: Vec<usize> = (0..n).map(|i| usize::from(i >= aerial)).collect();
    let per_track = aerial / 8;
    let previous = (0..n)
        .map(|i| {
            if i >= aerial {
                Some((i - aerial) % 2)
            } else if i < per_track {
                Some(0)
            } else if i < 2 * per_track {
                Some(1)
            } else if i < 2 * per_track + aerial / 2 {
                Some(2)
            } else {
                None
            }
        })
        .collect();
    let mut degradation = DMatrix::zeros(3, 5);
    degradation[(1, 3)] = 0.4;
    degradation[(1, 0)] = 0.1;
    degradation[(1, 1)] = 0.1;
    degradation[(1, 4)] = 0.1;
    AllocationProblem {
        capabilities: CapabilityMatrix::new(
            DMatrix::from_row_slice(2, 5, &TEAM_Q.concat()),
            names(&["aerial", "ground"]),
            names(&CAPABILITIES),
        )
        .expect("valid"),
        species: SpeciesMapping::from_species(2, species).expect("valid"),
        requirements: vec![tracking.clone(), tracking, coverage],
        degradation,
        task_weights: vec![100.0, 100.0, 10.0],
        species_costs: vec![0.1, 0.1],
        transition_costs: vec![65.0, 18.0, 45.0],
        previous,
        discrepancy: vec![0.0; n],
        relaxation_penalty: 1.0,
        delta_max: 1000.0,
        dv_thresh: 0.9,
    }
}
