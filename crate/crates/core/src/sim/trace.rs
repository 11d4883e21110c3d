use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One robot at the end of one tick.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobotRow {
    pub tick: u64,
    pub t: f64,
    pub robot: usize,
    pub species: usize,
    pub task: Option<usize>,
    pub x: f64,
    pub y: f64,
    pub sensing: f64,
    /// Measured task value after the step.
    pub value: f64,
    pub dv: f64,
    pub dv_smoothed: f64,
}

/// Degradation of one capability in one task at the end of one tick.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegradationRow {
    pub tick: u64,
    pub t: f64,
    pub task: usize,
    pub capability: usize,
    pub d: f64,
}

/// Capability margin `δ_m,u` under the allocation in force during a tick.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginRow {
    pub tick: u64,
    pub t: f64,
    pub task: usize,
    pub capability: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    /// An allocated robot's smoothed discrepancy crossed `ΔV_thresh`.
    /// Logged whether or not reallocation is enabled.
    RobotImpaired {
        robot: usize,
        task: usize,
    },
    TriggerFired {
        reason: TriggerReason,
    },
    MiqpSolved {
        objective: f64,
        nodes: u64,
        gap: f64,
        /// Solved margins `D`, one row per task.
        margins: Vec<Vec<f64>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        wall_ms: Option<f64>,
    },
    SolveFailed {
        message: String,
    },
    AllocationApplied {
        assignment: Vec<Option<usize>>,
        configs: Vec<usize>,
        relaxed: Vec<bool>,
    },
    Reassigned {
        robot: usize,
        from: Option<usize>,
        to: Option<usize>,
        transition_cost: f64,
    },
    ConfigurationSwitched {
        task: usize,
        from: usize,
        to: usize,
    },
    TaskRelaxed {
        task: usize,
        relaxed: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerReason {
    /// Some degradation entry grew by at least `χ` since the last solve.
    Degradation,
    /// An allocated robot's smoothed discrepancy crossed `ΔV_thresh`.
    Exclusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u64,
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub ticks: u64,
    pub solves: usize,
    pub failed_solves: usize,
    /// Minimum margin of each task over the whole run.
    pub min_margins: Vec<f64>,
    pub final_assignment: Vec<Option<usize>>,
    pub final_configs: Vec<usize>,
    pub final_relaxed: Vec<bool>,
    /// Per-solve wall times, only when timing was requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<Vec<f64>>,
    /// Command-line overrides applied to the scenario.
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    pub overrides: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub dt: f64,
    pub num_robots: usize,
    pub num_tasks: usize,
    pub num_capabilities: usize,
    pub robots: Vec<RobotRow>,
    pub degradation: Vec<DegradationRow>,
    pub margins: Vec<MarginRow>,
    pub events: Vec<Event>,
    pub summary: Summary,
}

impl SimTrace {
    pub fn solve_ticks(&self) -> Vec<u64> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::MiqpSolved { .. }))
            .map(|e| e.tick)
            .collect()
    }

    /// Rows of robot `robot`, one per tick.
    pub fn robot_series(&self, robot: usize) -> impl Iterator<Item = &RobotRow> + '_ {
        self.robots.iter().filter(move |r| r.robot == robot)
    }

    /// Degradation `d_m,u` over time.
    pub fn degradation_series(&self, task: usize, capability: usize) -> Vec<(f64, f64)> {
        self.degradation
            .iter()
            .filter(|r| r.task == task && r.capability == capability)
            .map(|r| (r.t, r.d))
            .collect()
    }

    /// Smallest margin of `task` at each tick.
    pub fn worst_margin_series(&self, task: usize) -> Vec<(f64, f64)> {
        let u = self.num_capabilities;
        self.margins
            .chunks(self.num_tasks * u)
            .map(|rows| {
                let task_rows = &rows[task * u..(task + 1) * u];
                let worst = task_rows.iter().map(|r| r.delta).fold(f64::INFINITY, f64::min);
                (task_rows[0].t, worst)
            })
            .collect()
    }

    /// Writes the five trace files into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut robots = String::from("t,robot,species,task,x,y,sensing,value,dv,dv_smoothed\n");
        for r in &self.robots {
            let task = r.task.map_or(String::new(), |m| m.to_string());
            writeln!(
                robots,
                "{},{},{},{},{},{},{},{},{},{}",
                r.t, r.robot, r.species, task, r.x, r.y, r.sensing, r.value, r.dv, r.dv_smoothed
            )
            .unwrap();
        }
        std::fs::write(dir.join("robots.csv"), robots)?;

        let mut degradation = String::from("t,task_id,capability,d\n");
        for r in &self.degradation {
            writeln!(degradation, "{},{},{},{}", r.t, r.task, r.capability, r.d).unwrap();
        }
        std::fs::write(dir.join("degradation.csv"), degradation)?;

        let mut margins = String::from("t,task_id,capability,delta\n");
        for r in &self.margins {
            writeln!(margins, "{},{},{},{}", r.t, r.task, r.capability, r.delta).unwrap();
        }
        std::fs::write(dir.join("margins.csv"), margins)?;

        let mut events = String::new();
        for e in &self.events {
            events.push_str(&serde_json::to_string(e)?);
            events.push('\n');
        }
        std::fs::write(dir.join("events.jsonl"), events)?;

        let mut summary = serde_json::to_string_pretty(&self.summary)?;
        summary.push('\n');
        std::fs::write(dir.join("summary.json"), summary)?;
        Ok(())
    }
}
