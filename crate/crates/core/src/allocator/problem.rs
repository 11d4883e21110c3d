use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::team::{CapabilityMatrix, SpeciesMapping};

/// One instance of the resilient allocation program.
///
/// Allocations are stored per robot (`Some(task)` or idle), which makes the
/// one-task-per-robot constraint structural.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    /// `Q`, species × capabilities.
    pub capabilities: CapabilityMatrix,
    /// `P` and `λ`.
    pub species: SpeciesMapping,
    /// `Y*_m` per task, `K_m × U`; each row is an alternative configuration.
    pub requirements: Vec<DMatrix<f64>>,
    /// `d`, tasks × capabilities, entries in `[0, 1]`.
    pub degradation: DMatrix<f64>,
    /// `w_J`.
    pub task_weights: Vec<f64>,
    /// Diagonal of `W_s`.
    pub species_costs: Vec<f64>,
    /// Diagonal of `T`.
    pub transition_costs: Vec<f64>,
    /// `A_p`.
    pub previous: Vec<Option<usize>>,
    /// Smoothed discrepancies `ΔV̄`.
    pub discrepancy: Vec<f64>,
    /// `l`.
    pub relaxation_penalty: f64,
    pub delta_max: f64,
    pub dv_thresh: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolverStats {
    pub nodes: u64,
    /// Certified absolute gap between the objective and the best bound.
    pub gap: f64,
    pub wall_ms: f64,
    pub node_limit_hit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationSolution {
    /// Task per robot (`None` = idle).
    pub assignment: Vec<Option<usize>>,
    /// Selected configuration row per task (`ι_m` as an index).
    pub configs: Vec<usize>,
    /// `φ`.
    pub relaxed: Vec<bool>,
    /// `D`, tasks × capabilities.
    pub margins: DMatrix<f64>,
    pub objective: f64,
    pub stats: SolverStats,
}

/// Breakdown of the objective into its four terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveTerms {
    pub deployment: f64,
    pub relaxation: f64,
    pub margin_penalty: f64,
    pub transition: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.deployment + self.relaxation + self.margin_penalty + self.transition
    }
}

/// Dense 0/1 matrix (tasks × robots) of a per-robot allocation.
pub fn allocation_matrix(assignment: &[Option<usize>], num_tasks: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(num_tasks, assignment.len());
    for (i, t) in assignment.iter().enumerate() {
        if let Some(m) = t {
            a[(*m, i)] = 1.0;
        }
    }
    a
}

impl AllocationProblem {
    pub fn num_tasks(&self) -> usize {
        self.requirements.len()
    }

    pub fn num_robots(&self) -> usize {
        self.species.num_robots()
    }

    pub fn num_capabilities(&self) -> usize {
        self.capabilities.num_capabilities()
    }

    /// Column-sum cap `⌊1 + ΔV_thresh − ΔV̄_i⌋ ∈ {0, 1}` as a boolean,
    /// compared directly to avoid rounding in `1 + t − t`.
    pub fn is_eligible(&self, robot: usize) -> bool {
        self.discrepancy[robot] <= self.dv_thresh
    }

    /// `T_mm` for a task, 0 for idle.
    pub fn transition_cost(&self, task: Option<usize>) -> f64 {
        task.map_or(0.0, |m| self.transition_costs[m])
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n, u) = (self.num_tasks(), self.num_robots(), self.num_capabilities());
        let s = self.capabilities.num_species();
        let dim = |context, expected, actual| {
            if expected == actual {
                Ok(())
            } else {
                Err(Error::Dimension {
                    context,
                    expected,
                    actual,
                })
            }
        };
        dim("species count of P vs Q", s, self.species.num_species())?;
        dim("degradation rows", m, self.degradation.nrows())?;
        dim("degradation columns", u, self.degradation.ncols())?;
        dim("task weights", m, self.task_weights.len())?;
        dim("transition costs", m, self.transition_costs.len())?;
        dim("species costs", s, self.species_costs.len())?;
        dim("previous allocation", n, self.previous.len())?;
        dim("discrepancies", n, self.discrepancy.len())?;
        for y in &self.requirements {
            dim("requirement columns", u, y.ncols())?;
            if y.nrows() == 0 {
                return Err(Error::Contract("every task needs at least one configuration".into()));
            }
            if y.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::Contract("requirements must be finite and nonnegative".into()));
            }
        }
        let unit = |v: &f64| (0.0..=1.0).contains(v);
        if !self.degradation.iter().all(unit) {
            return Err(Error::Contract("degradation entries must lie in [0, 1]".into()));
        }
        if !self.discrepancy.iter().all(unit) {
            return Err(Error::Contract("discrepancies must lie in [0, 1]".into()));
        }
        let nonneg = |v: &f64| *v >= 0.0 && v.is_finite();
        if !(self.task_weights.iter().all(nonneg)
            && self.species_costs.iter().all(nonneg)
            && self.transition_costs.iter().all(nonneg))
        {
            return Err(Error::Contract("weights and costs must be finite and nonnegative".into()));
        }
        if !(self.relaxation_penalty > 0.0 && self.relaxation_penalty.is_finite()) {
            return Err(Error::Contract("l must be positive".into()));
        }
        if !(self.delta_max > 0.0 && self.delta_max.is_finite()) {
            return Err(Error::Contract("delta_max must be positive".into()));
        }
        if !unit(&self.dv_thresh) {
            return Err(Error::Contract("dv_thresh must lie in [0, 1]".into()));
        }
        if self.previous.iter().flatten().any(|&t| t >= m) {
            return Err(Error::Contract("previous allocation names an unknown task".into()));
        }
        Ok(())
    }

    /// `(A Pᵀ Q)`: undegraded capabilities pooled in each task.
    fn raw_capabilities(&self, assignment: &[Option<usize>]) -> DMatrix<f64> {
        let (m, u) = (self.num_tasks(), self.num_capabilities());
        let q = self.capabilities.matrix();
        let mut raw = DMatrix::<f64>::zeros(m, u);
        for (i, t) in assignment.iter().enumerate() {
            if let Some(t) = t {
                let s = self.species.species_of(i);
                for c in 0..u {
                    raw[(*t, c)] += q[(s, c)];
                }
            }
        }
        raw
    }

    fn margin(&self, raw: &DMatrix<f64>, task: usize, config: usize, cap: usize) -> f64 {
        (1.0 - self.degradation[(task, cap)]) * raw[(task, cap)]
            - self.requirements[task][(config, cap)]
    }

    /// `δ_m = (1 − d_m) ⊙ (A_m Pᵀ Q)ᵀ − (ι_mᵀ Y*_m)ᵀ` for every task.
    pub fn margins(&self, assignment: &[Option<usize>], configs: &[usize]) -> DMatrix<f64> {
        let raw = self.raw_capabilities(assignment);
        DMatrix::from_fn(self.num_tasks(), self.num_capabilities(), |t, c| {
            self.margin(&raw, t, configs[t], c)
        })
    }

    /// Best configurations and relaxation flags for a fixed assignment. The
    /// objective separates per task, so each `ι_m` is chosen independently;
    /// exact ties prefer `φ_m = 0`, then the later configuration (the
    /// lexicographically smaller one-hot). `None` if some task cannot meet
    /// `−δ_max` under any configuration.
    pub fn best_completion(&self, assignment: &[Option<usize>]) -> Option<(Vec<usize>, Vec<bool>)> {
        let raw = self.raw_capabilities(assignment);
        let u = self.num_capabilities();
        let mut configs = Vec::with_capacity(self.num_tasks());
        let mut relaxed = Vec::with_capacity(self.num_tasks());
        for t in 0..self.num_tasks() {
            let mut best: Option<(f64, bool, usize)> = None;
            for k in 0..self.requirements[t].nrows() {
                let row: Vec<f64> = (0..u).map(|c| self.margin(&raw, t, k, c)).collect();
                let worst = row.iter().cloned().fold(f64::INFINITY, f64::min);
                if worst < -self.delta_max {
                    continue;
                }
                let phi = worst < 0.0;
                let sum: f64 = row.iter().sum();
                let cost = if phi { self.task_weights[t] } else { 0.0 }
                    + self.relaxation_penalty * sum * sum;
                let better = match best {
                    None => true,
                    Some((bc, bphi, _)) => cost < bc || (cost == bc && (!phi && bphi || phi == bphi)),
                };
                if better {
                    best = Some((cost, phi, k));
                }
            }
            let (_, phi, k) = best?;
            configs.push(k);
            relaxed.push(phi);
        }
        Some((configs, relaxed))
    }

    pub fn objective_terms(
        &self,
        assignment: &[Option<usize>],
        relaxed: &[bool],
        margins: &DMatrix<f64>,
    ) -> ObjectiveTerms {
        let deployment = assignment
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_some())
            .map(|(i, _)| self.species_costs[self.species.species_of(i)])
            .sum();
        let relaxation = relaxed
            .iter()
            .zip(&self.task_weights)
            .filter(|(r, _)| **r)
            .map(|(_, w)| w)
            .sum();
        let margin_penalty = self.relaxation_penalty
            * margins
                .row_iter()
                .map(|r| {
                    let s: f64 = r.sum();
                    s * s
                })
                .sum::<f64>();
        let transition = assignment
            .iter()
            .zip(&self.previous)
            .map(|(now, then)| (self.transition_cost(*now) - self.transition_cost(*then)).abs())
            .sum();
        ObjectiveTerms {
            deployment,
            relaxation,
            margin_penalty,
            transition,
        }
    }

    pub fn objective(
        &self,
        assignment: &[Option<usize>],
        relaxed: &[bool],
        margins: &DMatrix<f64>,
    ) -> f64 {
        self.objective_terms(assignment, relaxed, margins).total()
    }

    /// Number of deployed robots per species.
    pub fn species_usage(&self, assignment: &[Option<usize>]) -> Vec<usize> {
        let mut used = vec![0; self.capabilities.num_species()];
        for (i, t) in assignment.iter().enumerate() {
            if t.is_some() {
                used[self.species.species_of(i)] += 1;
            }
        }
        used
    }

    /// Cheapest feasible `φ` for fixed margins: relax exactly the tasks with a
    /// negative margin. `None` if some margin is below `−δ_max`.
    pub fn complete_relaxation(&self, margins: &DMatrix<f64>) -> Option<Vec<bool>> {
        margins
            .row_iter()
            .map(|r| {
                let worst = r.min();
                if worst >= 0.0 {
                    Some(false)
                } else if worst >= -self.delta_max {
                    Some(true)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Replay every constraint of a returned solution exactly.
    pub fn check_solution(&self, sol: &AllocationSolution) -> std::result::Result<(), String> {
        let (m, n) = (self.num_tasks(), self.num_robots());
        if sol.assignment.len() != n || sol.configs.len() != m || sol.relaxed.len() != m {
            return Err("solution dimensions do not match the problem".into());
        }
        if let Some(t) = sol.assignment.iter().flatten().find(|&&t| t >= m) {
            return Err(format!("robot assigned to unknown task {t}"));
        }
        for (t, &k) in sol.configs.iter().enumerate() {
            if k >= self.requirements[t].nrows() {
                return Err(format!("task {t} selects missing configuration {k}"));
            }
        }
        for (s, (&used, &cap)) in self
            .species_usage(&sol.assignment)
            .iter()
            .zip(self.species.lambda())
            .enumerate()
        {
            if used > cap {
                return Err(format!("species {s} deploys {used} > λ = {cap}"));
            }
        }
        for (i, t) in sol.assignment.iter().enumerate() {
            if t.is_some() && !self.is_eligible(i) {
                return Err(format!("excluded robot {i} is allocated"));
            }
        }
        let margins = self.margins(&sol.assignment, &sol.configs);
        if margins != sol.margins {
            return Err("margins differ from ĉ − Y*ᵀι".into());
        }
        for t in 0..m {
            let floor = if sol.relaxed[t] { -self.delta_max } else { 0.0 };
            for (c, &v) in margins.row(t).iter().enumerate() {
                if v < floor {
                    return Err(format!("margin δ[{t},{c}] = {v} below {floor}"));
                }
            }
        }
        let objective = self.objective(&sol.assignment, &sol.relaxed, &margins);
        if objective != sol.objective {
            return Err(format!("objective {} differs from replay {objective}", sol.objective));
        }
        Ok(())
    }

    /// Lexicographic key `(φ, vec A, vec ι)` used to break exact ties; `A` is
    /// vectorized column-major (robot by robot), `ι` task by task.
    pub(crate) fn tie_key(&self, sol_assignment: &[Option<usize>], configs: &[usize], relaxed: &[bool]) -> Vec<u8> {
        let m = self.num_tasks();
        let mut key: Vec<u8> = relaxed.iter().map(|&r| u8::from(r)).collect();
        for t in sol_assignment {
            key.extend((0..m).map(|j| u8::from(*t == Some(j))));
        }
        for (j, &k) in configs.iter().enumerate() {
            key.extend((0..self.requirements[j].nrows()).map(|r| u8::from(r == k)));
        }
        key
    }

    /// Effective capabilities `ĉ_m` of task `m` under an allocation.
    pub fn effective_capabilities(&self, assignment: &[Option<usize>], task: usize) -> DVector<f64> {
        let zero_cfg = vec![0; self.num_tasks()];
        let margins = self.margins(assignment, &zero_cfg);
        DVector::from_fn(self.num_capabilities(), |c, _| {
            margins[(task, c)] + self.requirements[task][(0, c)]
        })
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// One species, one capability, identical robots.
    pub fn scalar(n: usize, requirement: f64) -> AllocationProblem {
        AllocationProblem {
            capabilities: CapabilityMatrix::from_rows(&[vec![1.0]]).unwrap(),
            species: SpeciesMapping::from_species(1, vec![0; n]).unwrap(),
            requirements: vec![DMatrix::from_element(1, 1, requirement)],
            degradation: DMatrix::zeros(1, 1),
            task_weights: vec![1.0],
            species_costs: vec![0.1],
            transition_costs: vec![0.0],
            previous: vec![None; n],
            discrepancy: vec![0.0; n],
            relaxation_penalty: 1.0,
            delta_max: 1000.0,
            dv_thresh: 0.9,
        }
    }

    /// Example 2's two-species team with a single task.
    pub fn example2(requirement: &[f64], degradation: &[f64]) -> AllocationProblem {
        AllocationProblem {
            capabilities: CapabilityMatrix::from_rows(&[vec![10.0, 2.0, 0.0], vec![10.0, 0.0, 5.0]])
                .unwrap(),
            species: SpeciesMapping::from_species(2, vec![0, 1]).unwrap(),
            requirements: vec![DMatrix::from_row_slice(1, 3, requirement)],
            degradation: DMatrix::from_row_slice(1, 3, degradation),
            task_weights: vec![1.0],
            species_costs: vec![0.0, 0.0],
            transition_costs: vec![0.0],
            previous: vec![None; 2],
            discrepancy: vec![0.0; 2],
            relaxation_penalty: 1.0,
            delta_max: 1000.0,
            dv_thresh: 0.9,
        }
    }
}
