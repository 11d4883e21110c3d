use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::tasks::{DisturbanceSpec, TaskKind};
use crate::team::{CapabilityMatrix, SpeciesMapping};

/// A complete scenario: team, tasks, disturbance schedule and loop
/// parameters. Parsed from TOML; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub team: TeamConfig,
    pub tasks: Vec<TaskConfig>,
    #[serde(default)]
    pub disturbances: Vec<DisturbanceSpec>,
    pub sim: SimParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeamConfig {
    pub species: Vec<String>,
    pub capabilities: Vec<String>,
    /// Capability matrix `Q`, one row per species.
    pub q: Vec<Vec<f64>>,
    /// Robots per species; ids are assigned species by species.
    pub counts: Vec<usize>,
    /// Diagonal of `W_s`.
    pub deployment_costs: Vec<f64>,
    /// Initial (and home) position of every robot.
    pub positions: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub name: String,
    pub kind: TaskKind,
    /// Requirement matrix `Y*_m`, one row per configuration.
    pub requirements: Vec<Vec<f64>>,
    /// Priority `w_J,m`.
    pub weight: f64,
    /// Diagonal entry `T_mm`.
    pub transition_cost: f64,
    /// Controller gain override for this task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub dt: f64,
    pub duration: f64,
    /// Trigger threshold `χ`.
    pub chi: f64,
    pub dv_thresh: f64,
    /// Balance weight `l`.
    pub balance_weight: f64,
    pub delta_max: f64,
    /// Default controller gain `k`.
    pub gain: f64,
    pub coverage_resolution: usize,
    /// Speed limit on commanded velocities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_speed: Option<f64>,
    /// When false the team is allocated once at `t = 0` and never again.
    #[serde(default = "yes")]
    pub trigger: bool,
}

fn yes() -> bool {
    true
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::config(parse_path(&e), e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn num_robots(&self) -> usize {
        self.team.counts.iter().sum()
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn num_ticks(&self) -> u64 {
        (self.sim.duration / self.sim.dt).round() as u64
    }

    /// Species id of every robot.
    pub fn species_of(&self) -> Vec<usize> {
        self.team
            .counts
            .iter()
            .enumerate()
            .flat_map(|(s, &c)| std::iter::repeat_n(s, c))
            .collect()
    }

    pub fn positions(&self) -> Vec<Point> {
        self.team.positions.iter().map(|p| Point::new(p[0], p[1])).collect()
    }

    pub fn capability_matrix(&self) -> Result<CapabilityMatrix> {
        let u = self.team.capabilities.len();
        let q = DMatrix::from_fn(self.team.q.len(), u, |r, c| self.team.q[r][c]);
        CapabilityMatrix::new(q, self.team.species.clone(), self.team.capabilities.clone())
    }

    pub fn species_mapping(&self) -> Result<SpeciesMapping> {
        SpeciesMapping::from_species(self.team.species.len(), self.species_of())
    }

    pub fn requirement_matrices(&self) -> Vec<DMatrix<f64>> {
        let u = self.team.capabilities.len();
        self.tasks
            .iter()
            .map(|t| DMatrix::from_fn(t.requirements.len(), u, |r, c| t.requirements[r][c]))
            .collect()
    }

    pub fn task_gain(&self, task: usize) -> f64 {
        self.tasks[task].gain.unwrap_or(self.sim.gain)
    }

    /// Checks every invariant, naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        let team = &self.team;
        let s = team.species.len();
        let u = team.capabilities.len();
        if s == 0 {
            return Err(Error::config("team.species", "at least one species is required"));
        }
        if u == 0 {
            return Err(Error::config("team.capabilities", "at least one capability is required"));
        }
        if team.q.len() != s {
            return Err(Error::config("team.q", format!("expected {s} rows, got {}", team.q.len())));
        }
        for (r, row) in team.q.iter().enumerate() {
            if row.len() != u {
                return Err(Error::config(
                    format!("team.q[{r}]"),
                    format!("expected {u} entries, got {}", row.len()),
                ));
            }
            if let Some(c) = row.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::config(format!("team.q[{r}][{c}]"), "must be finite and >= 0"));
            }
        }
        if team.counts.len() != s {
            return Err(Error::config(
                "team.counts",
                format!("expected {s} entries, got {}", team.counts.len()),
            ));
        }
        check_costs("team.deployment_costs", &team.deployment_costs, s)?;
        let n = self.num_robots();
        if team.positions.len() != n {
            return Err(Error::config(
                "team.positions",
                format!("expected {n} positions, got {}", team.positions.len()),
            ));
        }
        if let Some(i) = team.positions.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::config(format!("team.positions[{i}]"), "must be finite"));
        }
        if self.tasks.is_empty() {
            return Err(Error::config("tasks", "at least one task is required"));
        }
        for (m, task) in self.tasks.iter().enumerate() {
            let path = |f: &str| format!("tasks[{m}].{f}");
            task.kind.validate().map_err(|e| Error::config(path("kind"), e))?;
            if task.requirements.is_empty() {
                return Err(Error::config(path("requirements"), "at least one configuration"));
            }
            for (k, row) in task.requirements.iter().enumerate() {
                if row.len() != u {
                    return Err(Error::config(
                        path(&format!("requirements[{k}]")),
                        format!("expected {u} entries, got {}", row.len()),
                    ));
                }
                if row.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(Error::config(
                        path(&format!("requirements[{k}]")),
                        "entries must be finite and >= 0",
                    ));
                }
            }
            if !(task.weight >= 0.0 && task.weight.is_finite()) {
                return Err(Error::config(path("weight"), "must be finite and >= 0"));
            }
            if !(task.transition_cost >= 0.0 && task.transition_cost.is_finite()) {
                return Err(Error::config(path("transition_cost"), "must be finite and >= 0"));
            }
            if let Some(g) = task.gain {
                if !(g > 0.0 && g.is_finite()) {
                    return Err(Error::config(path("gain"), "must be finite and > 0"));
                }
            }
        }
        for (j, d) in self.disturbances.iter().enumerate() {
            d.validate()
                .map_err(|e| Error::config(format!("disturbances[{j}]"), e))?;
            if let Some(robots) = &d.scope.robots {
                if let Some(r) = robots.iter().find(|&&r| r >= n) {
                    return Err(Error::config(
                        format!("disturbances[{j}].scope.robots"),
                        format!("robot {r} does not exist"),
                    ));
                }
            }
            if let Some(species) = &d.scope.species {
                if let Some(x) = species.iter().find(|&&x| x >= s) {
                    return Err(Error::config(
                        format!("disturbances[{j}].scope.species"),
                        format!("species {x} does not exist"),
                    ));
                }
            }
            if let Some(t) = d.scope.task {
                if t >= self.tasks.len() {
                    return Err(Error::config(
                        format!("disturbances[{j}].scope.task"),
                        format!("task {t} does not exist"),
                    ));
                }
            }
        }
        self.sim.validate()
    }
}

fn check_costs(path: &str, costs: &[f64], len: usize) -> Result<()> {
    if costs.len() != len {
        return Err(Error::config(path, format!("expected {len} entries, got {}", costs.len())));
    }
    if let Some(i) = costs.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::config(format!("{path}[{i}]"), "must be finite and >= 0"));
    }
    Ok(())
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let p = |f: &str| format!("sim.{f}");
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(p("dt"), "must be > 0"));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return Err(Error::config(p("duration"), "must be finite and >= dt"));
        }
        if !(self.chi > 0.0 && self.chi <= 1.0) {
            return Err(Error::config(p("chi"), "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.dv_thresh) {
            return Err(Error::config(p("dv_thresh"), "must lie in [0, 1]"));
        }
        if !(self.balance_weight > 0.0 && self.balance_weight.is_finite()) {
            return Err(Error::config(p("balance_weight"), "must be finite and > 0"));
        }
        if !(self.delta_max > 0.0 && self.delta_max.is_finite()) {
            return Err(Error::config(p("delta_max"), "must be finite and > 0"));
        }
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(Error::config(p("gain"), "must be finite and > 0"));
        }
        if let Some(v) = self.max_speed {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(p("max_speed"), "must be finite and > 0"));
            }
        }
        if self.coverage_resolution == 0 {
            return Err(Error::config(p("coverage_resolution"), "must be >= 1"));
        }
        Ok(())
    }
}

/// Dotted key path of a TOML parse error, when the span can be recovered.
fn parse_path(e: &toml::de::Error) -> String {
    let msg = e.message();
    if let Some(start) = msg.find('`') {
        if let Some(len) = msg[start + 1..].find('`') {
            return msg[start + 1..start + 1 + len].to_string();
        }
    }
    "<document>".into()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "pair"

[team]
species = ["ground", "aerial"]
capabilities = ["perception", "ground speed", "air speed"]
q = [[10.0, 2.0, 0.0], [10.0, 0.0, 5.0]]
counts = [1, 1]
deployment_costs = [0.0, 0.0]
positions = [[0.0, 0.0], [1.0, 0.0]]

[[tasks]]
name = "goal"
requirements = [[20.0, 2.0, 5.0]]
weight = 1.0
transition_cost = 0.0
kind = { type = "goal_tracking", goal = [[0.0, 5.0, 5.0]] }

[sim]
dt = 0.01
duration = 1.0
chi = 0.33
dv_thresh = 0.9
balance_weight = 1.0
delta_max = 1000.0
gain = 1.0
coverage_resolution = 20
"#;

    #[test]
    fn parses_minimal_file() {
        let c = ScenarioConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.num_robots(), 2);
        assert_eq!(c.num_ticks(), 100);
        assert_eq!(c.species_of(), vec![0, 1]);
        assert!(c.sim.trigger);
        let again = ScenarioConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_field_is_named() {
        let text = MINIMAL.replace("gain = 1.0", "gain = 1.0\ngian = 2.0");
        match ScenarioConfig::from_toml_str(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "gian"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_values_name_their_field() {
        let cases = [
            ("chi = 0.33", "chi = 0.0", "sim.chi"),
            ("dt = 0.01", "dt = -0.01", "sim.dt"),
            ("[20.0, 2.0, 5.0]", "[20.0, 2.0]", "tasks[0].requirements[0]"),
            ("counts = [1, 1]", "counts = [1, 2]", "team.positions"),
            ("weight = 1.0", "weight = -1.0", "tasks[0].weight"),
        ];
        for (from, to, want) in cases {
            match ScenarioConfig::from_toml_str(&MINIMAL.replace(from, to)) {
                Err(Error::Config { path, .. }) => assert_eq!(path, want),
                other => panic!("{to}: {other:?}"),
            }
        }
    }
}
