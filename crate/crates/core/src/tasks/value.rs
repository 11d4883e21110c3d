use crate::error::{Error, Result};
use crate::geometry::Point;

use super::TaskKind;

/// Everything needed to evaluate the per-robot task values of one task.
#[derive(Debug, Clone, Copy)]
pub struct TaskFrame<'a> {
    /// Robot ids currently allocated to the task, ascending.
    pub members: &'a [usize],
    /// Positions of every robot, indexed by robot id.
    pub positions: &'a [Point],
    /// Sensing-degradation states, indexed by robot id.
    pub sensing: &'a [f64],
    /// Goal or target position (ignored by coverage).
    pub reference: Point,
    /// Coverage centroids, indexed by robot id.
    pub centroids: &'a [Option<Point>],
}

/// Value of `V_m^(i)` with its analytic partial derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// `∂V/∂x_i`.
    pub grad_self: Point,
    /// `∂V/∂x_r` for neighbors `r` whose state enters the value.
    pub grad_neighbors: Vec<(usize, Point)>,
    /// `∂V/∂γ` for the moving reference.
    pub grad_reference: Point,
}

impl TaskFrame<'_> {
    fn position(&self, robot: usize) -> Result<Point> {
        self.positions
            .get(robot)
            .copied()
            .ok_or(Error::MissingState { robot })
    }

    fn sensing(&self, robot: usize) -> Result<f64> {
        self.sensing
            .get(robot)
            .copied()
            .ok_or(Error::MissingState { robot })
    }
}

const MIN_SQ_SEPARATION: f64 = 1e-12;

pub(crate) fn evaluate(kind: &TaskKind, robot: usize, frame: &TaskFrame<'_>) -> Result<Evaluation> {
    if !frame.members.contains(&robot) {
        return Err(Error::MissingState { robot });
    }
    let x = frame.position(robot)?;
    match kind {
        TaskKind::GoalTracking { .. } => Ok(goal_term(x, frame.reference)),
        TaskKind::Follower { distance, .. } => {
            let leader = frame.members[0];
            if leader == robot {
                return Ok(goal_term(x, frame.reference));
            }
            let xl = frame.position(leader)?;
            let r = x - xl;
            let n = r.norm();
            let gap = n - distance;
            let g = if n > 0.0 { r * (gap / n) } else { Point::zeros() };
            Ok(Evaluation {
                value: 0.5 * gap * gap,
                grad_self: g,
                grad_neighbors: vec![(leader, -g)],
                grad_reference: Point::zeros(),
            })
        }
        TaskKind::TargetTracking {
            desired_sq_distance,
            spacing,
            ..
        } => {
            let e = frame.sensing(robot)?;
            let rel = x - frame.reference;
            let s = rel.norm_squared();
            let a = s - desired_sq_distance;
            let mut value = 0.5 * (a * a + e * s);
            let radial = rel * (2.0 * a + e);
            let mut grad_self = radial;
            let mut grad_neighbors = Vec::new();
            // A lone tracker has no spacing term; the empty sum would leave a
            // constant 1/d0^4 offset in the value.
            if frame.members.len() > 1 {
                let mut b = -1.0 / (spacing * spacing);
                let mut dirs = Vec::with_capacity(frame.members.len() - 1);
                for &j in frame.members.iter().filter(|&&j| j != robot) {
                    let r = x - frame.position(j)?;
                    let r2 = r.norm_squared().max(MIN_SQ_SEPARATION);
                    b += 1.0 / r2;
                    // ∂(1/‖r‖²)/∂x_i = −2 r / ‖r‖⁴
                    dirs.push((j, r * (-2.0 / (r2 * r2))));
                }
                value += 0.5 * b * b;
                for (j, d) in dirs {
                    grad_self += d * b;
                    grad_neighbors.push((j, -d * b));
                }
            }
            Ok(Evaluation {
                value,
                grad_self,
                grad_neighbors,
                grad_reference: -radial,
            })
        }
        TaskKind::Coverage { .. } => {
            let c = frame
                .centroids
                .get(robot)
                .copied()
                .flatten()
                .ok_or(Error::MissingState { robot })?;
            let rel = x - c;
            Ok(Evaluation {
                value: 0.5 * rel.norm_squared(),
                grad_self: rel,
                grad_neighbors: Vec::new(),
                grad_reference: Point::zeros(),
            })
        }
    }
}

fn goal_term(x: Point, goal: Point) -> Evaluation {
    let rel = x - goal;
    Evaluation {
        value: 0.5 * rel.norm_squared(),
        grad_self: rel,
        grad_neighbors: Vec::new(),
        grad_reference: -rel,
    }
}

/// `V_m^(i)` for robot `robot` allocated to a task of kind `kind`.
pub fn robot_task_value(kind: &TaskKind, robot: usize, frame: &TaskFrame<'_>) -> Result<f64> {
    Ok(evaluate(kind, robot, frame)?.value)
}

/// Gradient-flow input `u_i = −k ∂V/∂x_i`.
pub fn gradient_controller(
    kind: &TaskKind,
    robot: usize,
    frame: &TaskFrame<'_>,
    gain: f64,
) -> Result<Point> {
    Ok(-evaluate(kind, robot, frame)?.grad_self * gain)
}

/// First-order prediction of `V_m^(i)` one step ahead from commanded
/// (disturbance-free) velocities.
///
/// `velocities[r]` is the commanded velocity of robot `r`; neighbors missing
/// from it are an error. `reference_velocity` is the known motion of the goal
/// or target.
pub fn predicted_task_value(
    kind: &TaskKind,
    robot: usize,
    frame: &TaskFrame<'_>,
    velocities: &[Point],
    reference_velocity: Point,
    dt: f64,
) -> Result<f64> {
    let ev = evaluate(kind, robot, frame)?;
    predict_from(&ev, robot, velocities, reference_velocity, dt)
}

pub(crate) fn predict_from(
    ev: &Evaluation,
    robot: usize,
    velocities: &[Point],
    reference_velocity: Point,
    dt: f64,
) -> Result<f64> {
    let vel = |r: usize| velocities.get(r).copied().ok_or(Error::MissingState { robot: r });
    let mut rate = ev.grad_self.dot(&vel(robot)?) + ev.grad_reference.dot(&reference_velocity);
    for (r, g) in &ev.grad_neighbors {
        rate += g.dot(&vel(*r)?);
    }
    Ok(ev.value + dt * rate)
}
