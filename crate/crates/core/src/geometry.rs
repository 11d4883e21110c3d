//! Planar points, axis-aligned regions and piecewise-linear trajectories.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

pub type Point = Vector2<f64>;

/// Axis-aligned rectangle `[min_x, max_x] × [min_y, max_y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Rect {
            min: [min_x, min_y],
            max: [max_x, max_y],
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min[0] && p.x <= self.max[0] && p.y >= self.min[1] && p.y <= self.max[1]
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn is_valid(&self) -> bool {
        self.width() > 0.0 && self.height() > 0.0
    }
}

/// A timestamped waypoint `[t, x, y]`.
pub type Waypoint = [f64; 3];

/// Piecewise-linear schedule through timestamped waypoints. The position is
/// held at the first waypoint before it and at the last one after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    waypoints: Vec<Waypoint>,
}

impl Trajectory {
    /// Waypoints must be non-empty with nondecreasing timestamps.
    pub fn new(waypoints: Vec<Waypoint>) -> Option<Self> {
        if waypoints.is_empty() || waypoints.windows(2).any(|w| w[1][0] < w[0][0]) {
            return None;
        }
        Some(Trajectory { waypoints })
    }

    pub fn stationary(p: Point) -> Self {
        Trajectory {
            waypoints: vec![[0.0, p.x, p.y]],
        }
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn is_valid(&self) -> bool {
        !self.waypoints.is_empty() && self.waypoints.windows(2).all(|w| w[1][0] >= w[0][0])
    }

    pub fn position(&self, t: f64) -> Point {
        let w = &self.waypoints;
        let first = w[0];
        if t <= first[0] {
            return Point::new(first[1], first[2]);
        }
        for pair in w.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if t <= b[0] {
                let span = b[0] - a[0];
                if span <= 0.0 {
                    return Point::new(b[1], b[2]);
                }
                let s = (t - a[0]) / span;
                return Point::new(a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2]));
            }
        }
        let last = w[w.len() - 1];
        Point::new(last[1], last[2])
    }

    /// Secant velocity over `[t, t + dt]`; exact within a linear segment.
    pub fn velocity(&self, t: f64, dt: f64) -> Point {
        (self.position(t + dt) - self.position(t)) / dt
    }

    /// Shift every timestamp by `offset` seconds.
    pub fn shifted(&self, offset: f64) -> Self {
        Trajectory {
            waypoints: self
                .waypoints
                .iter()
                .map(|w| [w[0] + offset, w[1], w[2]])
                .collect(),
        }
    }
}
