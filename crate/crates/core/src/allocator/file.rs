//! TOML problem files and JSON solution reports for one-shot solves.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::problem::{allocation_matrix, AllocationProblem, AllocationSolution};
use crate::error::{Error, Result};
use crate::team::{CapabilityMatrix, SpeciesMapping};

/// A standalone allocation problem.
///
/// ```toml
/// q = [[5.0, 1.0], [2.0, 3.0]]      # species × capabilities
/// robots = [0, 0, 1]                # species of each robot
/// requirements = [[[6.0, 2.0]], [[2.0, 1.0], [0.0, 3.0]]]
/// weights = [100.0, 10.0]
/// deployment_costs = [0.1, 0.1]
/// transition_costs = [65.0, 18.0]
/// balance_weight = 1.0
/// delta_max = 1000.0
/// ```
///
/// Optional: `species` and `capabilities` names, `availability` (`λ`),
/// `degradation` (tasks × capabilities, default 0), `previous` (task per
/// robot, `-1` for idle, default all idle), `discrepancy` (default 0) and
/// `dv_thresh` (default 0.9).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capabilities: Option<Vec<String>>,
    pub q: Vec<Vec<f64>>,
    pub robots: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub availability: Option<Vec<usize>>,
    /// One matrix per task, one row per configuration.
    pub requirements: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degradation: Option<Vec<Vec<f64>>>,
    pub weights: Vec<f64>,
    pub deployment_costs: Vec<f64>,
    pub transition_costs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrepancy: Option<Vec<f64>>,
    pub balance_weight: f64,
    pub delta_max: f64,
    #[serde(default = "default_dv_thresh")]
    pub dv_thresh: f64,
}

fn default_dv_thresh() -> f64 {
    0.9
}

fn expect_len(path: &str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::config(path, format!("expected {expected} entries, got {actual}")))
    }
}

fn rows_to_matrix(path: &str, rows: &[Vec<f64>], cols: usize) -> Result<DMatrix<f64>> {
    for (r, row) in rows.iter().enumerate() {
        expect_len(&format!("{path}[{r}]"), cols, row.len())?;
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

impl ProblemFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(field_of(&e), e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("problem serializes")
    }

    /// Parse and validate a problem file in one step.
    pub fn load(path: &Path) -> Result<AllocationProblem> {
        Self::from_file(path)?.to_problem()
    }

    pub fn to_problem(&self) -> Result<AllocationProblem> {
        let s = self.q.len();
        if s == 0 {
            return Err(Error::config("q", "at least one species is required"));
        }
        let u = self.q[0].len();
        if u == 0 {
            return Err(Error::config("q[0]", "at least one capability is required"));
        }
        let m = self.requirements.len();
        let n = self.robots.len();
        let names = |given: &Option<Vec<String>>, path: &str, len: usize, prefix: &str| -> Result<Vec<String>> {
            match given {
                Some(v) => {
                    expect_len(path, len, v.len())?;
                    Ok(v.clone())
                }
                None => Ok((0..len).map(|i| format!("{prefix}{i}")).collect()),
            }
        };
        let q = rows_to_matrix("q", &self.q, u)?;
        let capabilities = CapabilityMatrix::new(
            q,
            names(&self.species, "species", s, "s")?,
            names(&self.capabilities, "capabilities", u, "c")?,
        )
        .map_err(|e| Error::config("q", e.to_string()))?;
        if let Some(i) = self.robots.iter().position(|&r| r >= s) {
            return Err(Error::config(format!("robots[{i}]"), format!("species index must be below {s}")));
        }
        let mut species = SpeciesMapping::from_species(s, self.robots.clone())?;
        if let Some(lambda) = &self.availability {
            species = species
                .with_lambda(lambda.clone())
                .map_err(|e| Error::config("availability", e.to_string()))?;
        }
        let requirements = self
            .requirements
            .iter()
            .enumerate()
            .map(|(t, rows)| {
                if rows.is_empty() {
                    return Err(Error::config(format!("requirements[{t}]"), "at least one configuration"));
                }
                rows_to_matrix(&format!("requirements[{t}]"), rows, u)
            })
            .collect::<Result<Vec<_>>>()?;
        let degradation = match &self.degradation {
            Some(rows) => {
                expect_len("degradation", m, rows.len())?;
                rows_to_matrix("degradation", rows, u)?
            }
            None => DMatrix::zeros(m, u),
        };
        expect_len("weights", m, self.weights.len())?;
        expect_len("deployment_costs", s, self.deployment_costs.len())?;
        expect_len("transition_costs", m, self.transition_costs.len())?;
        let previous = match &self.previous {
            Some(p) => {
                expect_len("previous", n, p.len())?;
                p.iter()
                    .enumerate()
                    .map(|(i, &t)| match t {
                        -1 => Ok(None),
                        t if t >= 0 && (t as usize) < m => Ok(Some(t as usize)),
                        _ => Err(Error::config(format!("previous[{i}]"), format!("must be -1 or a task below {m}"))),
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            None => vec![None; n],
        };
        let discrepancy = match &self.discrepancy {
            Some(v) => {
                expect_len("discrepancy", n, v.len())?;
                v.clone()
            }
            None => vec![0.0; n],
        };
        let scalars = [
            ("balance_weight", self.balance_weight, self.balance_weight > 0.0, "must be positive"),
            ("delta_max", self.delta_max, self.delta_max >= 0.0, "must be nonnegative"),
            ("dv_thresh", self.dv_thresh, (0.0..=1.0).contains(&self.dv_thresh), "must lie in [0, 1]"),
        ];
        for (path, value, ok, message) in scalars {
            if !value.is_finite() || !ok {
                return Err(Error::config(path, format!("{message}, got {value}")));
            }
        }
        for (path, values) in [
            ("weights", &self.weights),
            ("deployment_costs", &self.deployment_costs),
            ("transition_costs", &self.transition_costs),
        ] {
            if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::config(format!("{path}[{i}]"), "must be finite and nonnegative"));
            }
        }
        let problem = AllocationProblem {
            capabilities,
            species,
            requirements,
            degradation,
            task_weights: self.weights.clone(),
            species_costs: self.deployment_costs.clone(),
            transition_costs: self.transition_costs.clone(),
            previous,
            discrepancy,
            relaxation_penalty: self.balance_weight,
            delta_max: self.delta_max,
            dv_thresh: self.dv_thresh,
        };
        problem.validate().map_err(|e| Error::config("<problem>", e.to_string()))?;
        Ok(problem)
    }

    pub fn from_problem(problem: &AllocationProblem) -> Self {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            m.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        let species = &problem.species;
        let default_lambda = SpeciesMapping::from_species(species.num_species(), species.species().to_vec())
            .map(|s| s.lambda().to_vec())
            .ok();
        ProblemFile {
            species: Some(problem.capabilities.species_names().to_vec()),
            capabilities: Some(problem.capabilities.capability_names().to_vec()),
            q: rows(problem.capabilities.matrix()),
            robots: species.species().to_vec(),
            availability: (default_lambda.as_deref() != Some(species.lambda())).then(|| species.lambda().to_vec()),
            requirements: problem.requirements.iter().map(rows).collect(),
            degradation: Some(rows(&problem.degradation)),
            weights: problem.task_weights.clone(),
            deployment_costs: problem.species_costs.clone(),
            transition_costs: problem.transition_costs.clone(),
            previous: Some(problem.previous.iter().map(|t| t.map_or(-1, |t| t as i64)).collect()),
            discrepancy: Some(problem.discrepancy.clone()),
            balance_weight: problem.relaxation_penalty,
            delta_max: problem.delta_max,
            dv_thresh: problem.dv_thresh,
        }
    }
}

fn field_of(e: &toml::de::Error) -> String {
    let msg = e.message();
    msg.find('`')
        .and_then(|start| msg[start + 1..].find('`').map(|len| msg[start + 1..start + 1 + len].to_string()))
        .unwrap_or_else(|| "<document>".into())
}

/// JSON view of a solution: `A` (tasks × robots), `iota` (one-hot row per
/// task), `phi`, `D` (tasks × capabilities) and solver statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    #[serde(rename = "A")]
    pub a: Vec<Vec<u8>>,
    pub iota: Vec<Vec<u8>>,
    pub phi: Vec<u8>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    pub objective: f64,
    pub gap: f64,
    pub nodes: u64,
    pub wall_ms: f64,
    pub node_limit_hit: bool,
}

impl SolutionReport {
    pub fn new(problem: &AllocationProblem, solution: &AllocationSolution) -> Self {
        let a = allocation_matrix(&solution.assignment, problem.num_tasks());
        SolutionReport {
            a: a.row_iter().map(|r| r.iter().map(|&v| v as u8).collect()).collect(),
            iota: solution
                .configs
                .iter()
                .zip(&problem.requirements)
                .map(|(&k, y)| (0..y.nrows()).map(|r| u8::from(r == k)).collect())
                .collect(),
            phi: solution.relaxed.iter().map(|&b| u8::from(b)).collect(),
            d: solution.margins.row_iter().map(|r| r.iter().copied().collect()).collect(),
            objective: solution.objective,
            gap: solution.stats.gap,
            nodes: solution.stats.nodes,
            wall_ms: solution.stats.wall_ms,
            node_limit_hit: solution.stats.node_limit_hit,
        }
    }
}
