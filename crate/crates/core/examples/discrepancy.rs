//! Task-progress discrepancy: a goal-tracking robot whose actuators deliver
//! only a fraction `1 − w` of the commanded velocity.

use resalloc::geometry::Point;
use resalloc::tasks::{
    gradient_controller, predicted_task_value, robot_task_value, smooth_discrepancy, task_discrepancy, TaskFrame,
    TaskKind,
};
use resalloc::geometry::Trajectory;

fn main() -> resalloc::Result<()> {
    let w = 0.3;
    let dt = 0.01;
    let kind = TaskKind::GoalTracking {
        goal: Trajectory::stationary(Point::zeros()),
    };
    let mut x = Point::new(-8.0, -6.0);
    let mut smoothed = 0.0;
    for tick in 0..=300 {
        let positions = [x];
        let frame = TaskFrame {
            members: &[0],
            positions: &positions,
            sensing: &[0.0],
            reference: Point::zeros(),
            centroids: &[],
        };
        let before = robot_task_value(&kind, 0, &frame)?;
        let u = gradient_controller(&kind, 0, &frame, 1.0)?;
        let predicted = predicted_task_value(&kind, 0, &frame, &[u], Point::zeros(), dt)?;
        x += u * (1.0 - w) * dt;
        let after = robot_task_value(&kind, 0, &TaskFrame { positions: &[x], ..frame })?;
        let dv = task_discrepancy(before, after, predicted);
        smoothed = smooth_discrepancy(smoothed, dv, dt);
        if tick % 50 == 0 {
            println!("t={:4.2}  V={after:8.3}  dV={dv:.3}  smoothed={smoothed:.3}", tick as f64 * dt);
        }
    }
    Ok(())
}
