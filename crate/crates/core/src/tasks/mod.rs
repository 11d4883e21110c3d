//! Task execution: value functions, controllers, robot dynamics, predicted
//! task values and the per-robot performance discrepancy.

mod coverage;
mod discrepancy;
mod dynamics;
mod value;

pub use coverage::{coverage_targets, locational_cost, Density};
pub use discrepancy::{smooth_discrepancy, task_discrepancy, DiscrepancyRecord, DEGENERATE_EPS};
pub use dynamics::{step_dynamics, DisturbanceKind, DisturbanceSpec, Scope};
pub(crate) use value::{evaluate, predict_from};
pub use value::{
    gradient_controller, predicted_task_value, robot_task_value, Evaluation, TaskFrame,
};

use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Rect, Trajectory};

/// State of a single robot. Robot ids are indices into the team.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub position: Point,
    pub species: usize,
    /// Sensing-degradation state `e`, unitless and nonnegative.
    pub sensing: f64,
    pub task: Option<usize>,
}

impl RobotState {
    pub fn new(position: Point, species: usize) -> Self {
        RobotState {
            position,
            species,
            sensing: 0.0,
            task: None,
        }
    }
}

/// Task-value function families. Every family composes per-robot terms by
/// summation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskKind {
    /// Every member drives toward the goal: `½‖x − g‖²`.
    GoalTracking { goal: Trajectory },
    /// The lowest-id member tracks the goal; every other member keeps
    /// `distance` from it: `½(‖x − x_lead‖ − d)²`.
    Follower { goal: Trajectory, distance: f64 },
    /// Ring tracking around a moving target with sensing and spacing terms.
    /// `desired_sq_distance` is the squared radius `d_k`; `spacing` is `d_0`.
    TargetTracking {
        target: Trajectory,
        desired_sq_distance: f64,
        spacing: f64,
    },
    /// Density-weighted coverage over a rectangle; each member drives to the
    /// centroid of its Voronoi cell.
    Coverage { domain: Rect, density: Density },
}

impl TaskKind {
    /// Position and velocity of the moving reference (goal or target) at `t`.
    pub fn reference(&self, t: f64, dt: f64) -> Option<(Point, Point)> {
        match self {
            TaskKind::GoalTracking { goal } | TaskKind::Follower { goal, .. } => {
                Some((goal.position(t), goal.velocity(t, dt)))
            }
            TaskKind::TargetTracking { target, .. } => {
                Some((target.position(t), target.velocity(t, dt)))
            }
            TaskKind::Coverage { .. } => None,
        }
    }

    pub fn is_coverage(&self) -> bool {
        matches!(self, TaskKind::Coverage { .. })
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            TaskKind::GoalTracking { goal } => {
                if !goal.is_valid() {
                    return Err("goal trajectory is empty or unsorted".into());
                }
            }
            TaskKind::Follower { goal, distance } => {
                if !goal.is_valid() {
                    return Err("goal trajectory is empty or unsorted".into());
                }
                if !(*distance >= 0.0) {
                    return Err(format!("follow distance {distance} must be >= 0"));
                }
            }
            TaskKind::TargetTracking {
                target,
                desired_sq_distance,
                spacing,
            } => {
                if !target.is_valid() {
                    return Err("target trajectory is empty or unsorted".into());
                }
                if !(*desired_sq_distance >= 0.0) {
                    return Err(format!("desired_sq_distance {desired_sq_distance} must be >= 0"));
                }
                if !(*spacing > 0.0) {
                    return Err(format!("spacing {spacing} must be > 0"));
                }
            }
            TaskKind::Coverage { domain, density } => {
                if !domain.is_valid() {
                    return Err("coverage domain has no area".into());
                }
                if let Density::Gaussian { sigma } = density {
                    if !(*sigma > 0.0) {
                        return Err(format!("density sigma {sigma} must be > 0"));
                    }
                }
            }
        }
        Ok(())
    }
}
