//! Aggregated formulation of the allocation program.
//!
//! Robots sharing species, previous task and eligibility are interchangeable
//! in every term of the objective and every constraint, so the model works
//! with integer counts `x[c][m]` of class `c` robots sent to task `m`. The
//! transition term is exactly linear in these counts because each robot holds
//! at most one task: moving one robot of a class with previous task `p` to
//! `m` costs `|T_m − T_p|` instead of the idle cost `T_p`.

use nalgebra::{DMatrix, DVector};

use super::problem::AllocationProblem;
use super::qp::{QpSolution, QpStatus, QuadraticProgram};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobotClass {
    pub species: usize,
    pub previous: Option<usize>,
    /// Member robot ids, ascending.
    pub robots: Vec<usize>,
}

/// Variable and row counts of a built model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDimensions {
    /// Integer class-count variables (`classes × tasks`).
    pub count_vars: usize,
    /// Binary configuration selectors `ι` (`Σ K_m`).
    pub config_vars: usize,
    /// Binary relaxation flags `φ` (`M`).
    pub relax_vars: usize,
    /// Capability-margin rows (`M × U`).
    pub margin_rows: usize,
}

#[derive(Debug, Clone)]
pub struct AllocationModel<'p> {
    pub(crate) problem: &'p AllocationProblem,
    pub classes: Vec<RobotClass>,
    pub(crate) m: usize,
    pub(crate) u: usize,
    cfg_offset: Vec<usize>,
    pub(crate) n_int: usize,
    s_offset: usize,
    v_offset: usize,
    pub(crate) qp: QuadraticProgram,
    constant: f64,
    rho: f64,
    margin_row0: usize,
}

/// Build the aggregated relaxation model.
pub fn build_model(problem: &AllocationProblem) -> Result<AllocationModel<'_>> {
    problem.validate()?;
    let (m, u) = (problem.num_tasks(), problem.num_capabilities());
    let q = problem.capabilities.matrix();

    let mut classes: Vec<RobotClass> = Vec::new();
    for i in 0..problem.num_robots() {
        if !problem.is_eligible(i) {
            continue;
        }
        let (s, p) = (problem.species.species_of(i), problem.previous[i]);
        match classes.iter_mut().find(|c| c.species == s && c.previous == p) {
            Some(c) => c.robots.push(i),
            None => classes.push(RobotClass {
                species: s,
                previous: p,
                robots: vec![i],
            }),
        }
    }
    let nc = classes.len();
    let mut cfg_offset = Vec::with_capacity(m);
    let mut off = nc * m;
    for y in &problem.requirements {
        cfg_offset.push(off);
        off += y.nrows();
    }
    let phi_offset = off;
    let n_int = phi_offset + m;
    let s_offset = n_int;
    let v_offset = s_offset + m;
    let n = v_offset + m * u;

    let mut c = DVector::zeros(n);
    let mut lb = DVector::zeros(n);
    let mut ub = DVector::from_element(n, 1.0);
    let lambda = problem.species.lambda();
    for (ci, class) in classes.iter().enumerate() {
        let tp = problem.transition_cost(class.previous);
        let cap = class.robots.len().min(lambda[class.species]) as f64;
        for t in 0..m {
            let j = ci * m + t;
            c[j] = problem.species_costs[class.species] + (problem.transition_costs[t] - tp).abs() - tp;
            ub[j] = cap;
        }
    }
    for t in 0..m {
        c[phi_offset + t] = problem.task_weights[t];
        lb[s_offset + t] = f64::NEG_INFINITY;
        ub[s_offset + t] = f64::INFINITY;
    }
    let scale = 1.0
        + problem
            .task_weights
            .iter()
            .chain(&problem.transition_costs)
            .chain(&problem.species_costs)
            .fold(0.0f64, |a, &b| a.max(b));
    // Elastic margin slack is `w / ρ` at unit cost, which keeps the cost
    // vector well scaled while penalizing violation by ρ.
    let rho = 1e4 * scale;
    for j in v_offset..n {
        c[j] = 1.0;
        ub[j] = f64::INFINITY;
    }
    let constant: f64 = (0..problem.num_robots())
        .map(|i| problem.transition_cost(problem.previous[i]))
        .sum();

    let mut h = DMatrix::zeros(n, n);
    for t in 0..m {
        h[(s_offset + t, s_offset + t)] = 2.0 * problem.relaxation_penalty;
    }

    // Equalities: Σ_k ι_mk = 1; s_m − Σ_u δ_mu = 0.
    let mut e = DMatrix::zeros(2 * m, n);
    let mut f = DVector::zeros(2 * m);
    for t in 0..m {
        let k = problem.requirements[t].nrows();
        for r in 0..k {
            e[(t, cfg_offset[t] + r)] = 1.0;
            e[(m + t, cfg_offset[t] + r)] = problem.requirements[t].row(r).sum();
        }
        f[t] = 1.0;
        e[(m + t, s_offset + t)] = 1.0;
        for (ci, class) in classes.iter().enumerate() {
            let per_robot: f64 = (0..u)
                .map(|cap| (1.0 - problem.degradation[(t, cap)]) * q[(class.species, cap)])
                .sum();
            e[(m + t, ci * m + t)] = -per_robot;
        }
    }

    // Inequalities: class caps, species caps, margins.
    let num_species = problem.capabilities.num_species();
    let margin_row0 = nc + num_species;
    let rows = margin_row0 + m * u;
    let mut g = DMatrix::zeros(rows, n);
    let mut hv = DVector::zeros(rows);
    for (ci, class) in classes.iter().enumerate() {
        for t in 0..m {
            g[(ci, ci * m + t)] = 1.0;
            g[(nc + class.species, ci * m + t)] = 1.0;
        }
        hv[ci] = class.robots.len() as f64;
    }
    for s in 0..num_species {
        hv[nc + s] = lambda[s] as f64;
    }
    for t in 0..m {
        for cap in 0..u {
            let r = margin_row0 + t * u + cap;
            for (ci, class) in classes.iter().enumerate() {
                g[(r, ci * m + t)] = -(1.0 - problem.degradation[(t, cap)]) * q[(class.species, cap)];
            }
            for k in 0..problem.requirements[t].nrows() {
                g[(r, cfg_offset[t] + k)] = problem.requirements[t][(k, cap)];
            }
            // Margins never fall below −max_k y_k,u, so the big-M can be
            // tightened without cutting off any integer point.
            let deepest = problem.requirements[t].column(cap).max();
            g[(r, phi_offset + t)] = -problem.delta_max.min(deepest);
            g[(r, v_offset + t * u + cap)] = -1.0 / rho;
        }
    }

    Ok(AllocationModel {
        problem,
        classes,
        m,
        u,
        cfg_offset,
        n_int,
        s_offset,
        v_offset,
        qp: QuadraticProgram {
            h,
            c,
            e,
            f,
            g,
            hvec: hv,
            lb,
            ub,
        },
        constant,
        rho,
        margin_row0,
    })
}

/// Result of one node relaxation.
#[derive(Debug, Clone)]
pub(crate) struct Relaxation {
    pub bound: f64,
    pub z: DVector<f64>,
    /// Largest elastic violation of a margin row.
    pub violation: f64,
}

impl AllocationModel<'_> {
    pub fn dimensions(&self) -> ModelDimensions {
        ModelDimensions {
            count_vars: self.classes.len() * self.m,
            config_vars: self.problem.requirements.iter().map(|y| y.nrows()).sum(),
            relax_vars: self.m,
            margin_rows: self.m * self.u,
        }
    }

    pub(crate) fn count_index(&self, class: usize, task: usize) -> usize {
        class * self.m + task
    }

    pub(crate) fn num_counts(&self) -> usize {
        self.classes.len() * self.m
    }

    /// Initial bounds of the integer variables.
    pub(crate) fn root_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.qp.lb.rows(0, self.n_int).iter().cloned().collect(),
            self.qp.ub.rows(0, self.n_int).iter().cloned().collect(),
        )
    }

    /// Cheap necessary conditions on integer bounds.
    pub(crate) fn trivially_infeasible(&self, lb: &[f64], ub: &[f64]) -> bool {
        if lb.iter().zip(ub).any(|(l, u)| l > u) {
            return true;
        }
        let mut per_species = vec![0.0; self.problem.capabilities.num_species()];
        for (ci, class) in self.classes.iter().enumerate() {
            let used: f64 = (0..self.m).map(|t| lb[self.count_index(ci, t)]).sum();
            if used > class.robots.len() as f64 {
                return true;
            }
            per_species[class.species] += used;
        }
        if per_species
            .iter()
            .zip(self.problem.species.lambda())
            .any(|(&used, &cap)| used > cap as f64)
        {
            return true;
        }
        (0..self.m).any(|t| {
            let k = self.problem.requirements[t].nrows();
            let lo: f64 = (0..k).map(|r| lb[self.cfg_offset[t] + r]).sum();
            let hi: f64 = (0..k).map(|r| ub[self.cfg_offset[t] + r]).sum();
            lo > 1.0 || hi < 1.0
        })
    }

    /// Solve the continuous relaxation over the given integer bounds and
    /// return a rigorous Lagrangian lower bound.
    pub(crate) fn relax(&self, lb: &[f64], ub: &[f64]) -> Relaxation {
        let mut qp = self.qp.clone();
        for j in 0..self.n_int {
            qp.lb[j] = lb[j];
            qp.ub[j] = ub[j];
        }
        let sol = qp.solve();
        if sol.status == QpStatus::Infeasible {
            return Relaxation {
                bound: f64::INFINITY,
                violation: f64::INFINITY,
                z: sol.z,
            };
        }
        let bound = self.lagrangian_bound(&qp, &sol);
        let mut violation = sol.z.rows(self.v_offset, self.m * self.u).iter().cloned().fold(0.0, f64::max) / self.rho;
        // A diverged iterate still yields a valid bound, but its point is
        // only good as a rounding hint: pull it into the box and never let
        // it close a node.
        let mut z = sol.z;
        if z.iter().any(|v| !v.is_finite()) {
            violation = f64::INFINITY;
        }
        for j in 0..self.n_int {
            z[j] = if z[j].is_finite() { z[j].clamp(lb[j], ub[j]) } else { lb[j] };
        }
        Relaxation { bound, violation, z }
    }

    /// `min_z L(z, y, λ)` over the variable box: valid for any `y` and any
    /// `λ ≥ 0`; margin multipliers are clipped to `ρ` so the elastic
    /// variables stay bounded below.
    fn lagrangian_bound(&self, qp: &QuadraticProgram, sol: &QpSolution) -> f64 {
        // Any finite `y` and `λ ≥ 0` give a valid bound, so a diverged
        // multiplier is simply dropped.
        let y = sol.y.map(|v| if v.is_finite() { v } else { 0.0 });
        let mut lam = sol.lambda.map(|v| if v.is_finite() { v.max(0.0) } else { 0.0 });
        for r in self.margin_row0..lam.len() {
            lam[r] = lam[r].min(self.rho);
        }
        let reduced = &qp.c + qp.e.transpose() * &y + qp.g.transpose() * &lam;
        let mut value = self.constant - y.dot(&qp.f) - lam.dot(&qp.hvec);
        for j in 0..self.s_offset {
            let cj = reduced[j];
            value += if cj >= 0.0 { cj * qp.lb[j] } else { cj * qp.ub[j] };
        }
        for t in 0..self.m {
            let j = self.s_offset + t;
            value -= reduced[j] * reduced[j] / (2.0 * qp.h[(j, j)]);
        }
        for j in self.v_offset..reduced.len() {
            // reduced[j] = 1 − λ/ρ ≥ 0, so the minimum over w ≥ 0 is at w = 0.
            debug_assert!(reduced[j] >= -1e-9);
        }
        value
    }

    /// Expand class counts into a per-robot assignment. Within a class the
    /// lowest ids stay idle, then fill the last task down to the first, which
    /// yields the lexicographically smallest column-major `A`.
    pub(crate) fn expand(&self, counts: &[usize]) -> Vec<Option<usize>> {
        let mut assignment = vec![None; self.problem.num_robots()];
        for (ci, class) in self.classes.iter().enumerate() {
            let assigned: usize = (0..self.m).map(|t| counts[self.count_index(ci, t)]).sum();
            let mut it = class.robots.iter().skip(class.robots.len() - assigned);
            for t in (0..self.m).rev() {
                for _ in 0..counts[self.count_index(ci, t)] {
                    assignment[*it.next().expect("counts within class size")] = Some(t);
                }
            }
        }
        assignment
    }

    /// Whether class counts respect class sizes and species availability.
    pub(crate) fn counts_feasible(&self, counts: &[usize]) -> bool {
        let mut per_species = vec![0; self.problem.capabilities.num_species()];
        for (ci, class) in self.classes.iter().enumerate() {
            let used: usize = (0..self.m).map(|t| counts[self.count_index(ci, t)]).sum();
            if used > class.robots.len() {
                return false;
            }
            per_species[class.species] += used;
        }
        per_species
            .iter()
            .zip(self.problem.species.lambda())
            .all(|(u, l)| u <= l)
    }
}

#[cfg(test)]
mod tests {
    use super::super::problem::fixtures::*;
    use super::*;

    #[test]
    fn scalar_instance_dimensions() {
        let p = scalar(2, 2.0);
        let model = build_model(&p).unwrap();
        // both robots share a class
        assert_eq!(
            model.dimensions(),
            ModelDimensions {
                count_vars: 1,
                config_vars: 1,
                relax_vars: 1,
                margin_rows: 1,
            }
        );
    }

    #[test]
    fn classes_split_by_previous_task_and_eligibility() {
        let mut p = scalar(4, 2.0);
        p.previous = vec![Some(0), None, Some(0), None];
        p.discrepancy = vec![0.0, 0.0, 0.95, 0.0];
        let model = build_model(&p).unwrap();
        assert_eq!(model.classes.len(), 2);
        assert_eq!(model.classes[0].robots, vec![0]);
        assert_eq!(model.classes[1].robots, vec![1, 3]);
    }

    #[test]
    fn expansion_is_lexicographically_smallest() {
        let mut p = scalar(3, 2.0);
        p.requirements.push(DMatrix::from_element(1, 1, 1.0));
        p.degradation = DMatrix::zeros(2, 1);
        p.task_weights = vec![1.0, 1.0];
        p.transition_costs = vec![0.0, 0.0];
        let model = build_model(&p).unwrap();
        // one in task 0, one in task 1, one idle
        assert_eq!(model.expand(&[1, 1]), vec![None, Some(1), Some(0)]);
    }

    #[test]
    fn bad_requirement_shape_is_structural_error() {
        let mut p = scalar(2, 2.0);
        p.requirements[0] = DMatrix::zeros(1, 3);
        assert!(build_model(&p).is_err());
    }
}
