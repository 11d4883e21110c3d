use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Rect};

use super::RobotState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    /// Scales the commanded velocity by `1 − w`.
    ControlMultiplier,
    /// A control multiplier that only acts inside its region.
    FrictionZone,
    /// Raises the sensing state `e` at `magnitude` per second.
    SensingFog,
}

/// Which robots a disturbance affects. Every present filter must match.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scope {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robots: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Rect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<usize>,
}

impl Scope {
    pub fn matches(&self, robot: usize, state: &RobotState) -> bool {
        self.robots.as_ref().is_none_or(|r| r.contains(&robot))
            && self.species.as_ref().is_none_or(|s| s.contains(&state.species))
            && self.region.as_ref().is_none_or(|r| r.contains(&state.position))
            && self.task.is_none_or(|t| state.task == Some(t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSpec {
    pub kind: DisturbanceKind,
    /// Multiplier `w ∈ [0, 1]`, or the `e` growth rate for fog.
    pub magnitude: f64,
    pub start: f64,
    #[serde(default = "forever")]
    pub end: f64,
    /// Seconds for a multiplier to ramp linearly from 0 to `magnitude`.
    #[serde(default)]
    pub ramp: f64,
    #[serde(default)]
    pub scope: Scope,
}

fn forever() -> f64 {
    f64::INFINITY
}

impl DisturbanceSpec {
    pub fn is_active(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }

    /// Effective multiplier at time `t` (zero outside the window).
    pub fn multiplier(&self, t: f64) -> f64 {
        if !self.is_active(t) {
            return 0.0;
        }
        if self.ramp > 0.0 {
            self.magnitude * ((t - self.start) / self.ramp).clamp(0.0, 1.0)
        } else {
            self.magnitude
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.end > self.start) {
            return Err(format!("window [{}, {}] is empty", self.start, self.end));
        }
        if !(self.ramp >= 0.0) {
            return Err(format!("ramp {} must be >= 0", self.ramp));
        }
        match self.kind {
            DisturbanceKind::ControlMultiplier | DisturbanceKind::FrictionZone => {
                if !(0.0..=1.0).contains(&self.magnitude) {
                    return Err(format!("multiplier {} outside [0, 1]", self.magnitude));
                }
            }
            DisturbanceKind::SensingFog => {
                if !(self.magnitude >= 0.0) {
                    return Err(format!("fog rate {} must be >= 0", self.magnitude));
                }
            }
        }
        if self.kind == DisturbanceKind::FrictionZone && self.scope.region.is_none() {
            return Err("friction_zone requires a region".into());
        }
        Ok(())
    }
}

/// One explicit-Euler step of `ẋ = Π_j(1 − w_j)·u` over `[t, t + dt]`.
/// Multipliers compose multiplicatively; fog raises `e` instead of moving
/// the robot. Scope is tested against the state at `t`.
pub fn step_dynamics(
    robot: usize,
    state: &mut RobotState,
    u: Point,
    disturbances: &[DisturbanceSpec],
    t: f64,
    dt: f64,
) {
    let mut factor = 1.0;
    let mut de = 0.0;
    for d in disturbances
        .iter()
        .filter(|d| d.is_active(t) && d.scope.matches(robot, state))
    {
        match d.kind {
            DisturbanceKind::ControlMultiplier | DisturbanceKind::FrictionZone => {
                factor *= 1.0 - d.multiplier(t)
            }
            DisturbanceKind::SensingFog => de += d.magnitude * dt,
        }
    }
    state.position += u * (dt * factor);
    state.sensing = (state.sensing + de).max(0.0);
}
