use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::model::{build_model, AllocationModel};
use super::problem::{AllocationProblem, AllocationSolution, SolverStats};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Relative optimality gap at which a node is pruned.
    pub gap_tol: f64,
    pub node_limit: u64,
    /// Added to every node bound. Test hook for the oracle negative control;
    /// any positive value makes the solver unsound.
    #[doc(hidden)]
    pub bound_bias: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            gap_tol: 1e-6,
            node_limit: 1_000_000,
            bound_bias: 0.0,
        }
    }
}

const INT_TOL: f64 = 1e-6;

struct Node {
    lb: Vec<f64>,
    ub: Vec<f64>,
    bound: f64,
    seq: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    solution: AllocationSolution,
    key: Vec<u8>,
}

struct Search<'a, 'p> {
    model: &'a AllocationModel<'p>,
    incumbent: Option<Incumbent>,
}

impl Search<'_, '_> {
    fn problem(&self) -> &AllocationProblem {
        self.model.problem
    }

    fn upper(&self) -> f64 {
        self.incumbent
            .as_ref()
            .map_or(f64::INFINITY, |i| i.solution.objective)
    }

    /// Exact evaluation of integer class counts; updates the incumbent.
    fn offer(&mut self, counts: &[usize]) -> Option<f64> {
        if !self.model.counts_feasible(counts) {
            return None;
        }
        let p = self.problem();
        let assignment = self.model.expand(counts);
        let (configs, relaxed) = p.best_completion(&assignment)?;
        let margins = p.margins(&assignment, &configs);
        let objective = p.objective(&assignment, &relaxed, &margins);
        let key = p.tie_key(&assignment, &configs, &relaxed);
        let better = match &self.incumbent {
            None => true,
            Some(inc) => {
                objective < inc.solution.objective
                    || (objective == inc.solution.objective && key < inc.key)
            }
        };
        if better {
            self.incumbent = Some(Incumbent {
                solution: AllocationSolution {
                    assignment,
                    configs,
                    relaxed,
                    margins,
                    objective,
                    stats: SolverStats::default(),
                },
                key,
            });
        }
        Some(objective)
    }

    /// Exact objective of integer counts (infinite if infeasible).
    fn value_of(&self, counts: &[usize]) -> f64 {
        if !self.model.counts_feasible(counts) {
            return f64::INFINITY;
        }
        let p = self.problem();
        let assignment = self.model.expand(counts);
        match p.best_completion(&assignment) {
            Some((configs, relaxed)) => {
                p.objective(&assignment, &relaxed, &p.margins(&assignment, &configs))
            }
            None => f64::INFINITY,
        }
    }

    /// Round relaxed counts and repair class and species capacities by
    /// dropping the most-rounded-up robots first.
    fn round(&self, z: &[f64]) -> Vec<usize> {
        let model = self.model;
        let nc = model.num_counts();
        let mut counts: Vec<usize> = z[..nc].iter().map(|v| v.round().max(0.0) as usize).collect();
        let excess = |counts: &[usize], idx: &[usize], cap: usize| -> usize {
            idx.iter().map(|&j| counts[j]).sum::<usize>().saturating_sub(cap)
        };
        let shed = |counts: &mut Vec<usize>, idx: Vec<usize>, cap: usize| {
            let mut over = excess(counts, &idx, cap);
            while over > 0 {
                let j = *idx
                    .iter()
                    .filter(|&&j| counts[j] > 0)
                    .max_by(|&&a, &&b| {
                        (counts[a] as f64 - z[a])
                            .total_cmp(&(counts[b] as f64 - z[b]))
                            .then(b.cmp(&a))
                    })
                    .expect("positive excess implies a positive count");
                counts[j] -= 1;
                over -= 1;
            }
        };
        for (ci, class) in model.classes.iter().enumerate() {
            let idx: Vec<usize> = (0..model.m).map(|t| model.count_index(ci, t)).collect();
            shed(&mut counts, idx, class.robots.len());
        }
        for (s, &cap) in self.problem().species.lambda().iter().enumerate() {
            let idx: Vec<usize> = model
                .classes
                .iter()
                .enumerate()
                .filter(|(_, c)| c.species == s)
                .flat_map(|(ci, _)| (0..model.m).map(move |t| ci * model.m + t))
                .collect();
            shed(&mut counts, idx, cap);
        }
        counts
    }

    /// First-improvement local search over single-robot moves.
    fn improve(&mut self, mut counts: Vec<usize>) {
        let Some(mut best) = self.offer(&counts) else {
            return;
        };
        let model = self.model;
        loop {
            let mut moved = false;
            for ci in 0..model.classes.len() {
                // `None` stands for the idle pool of the class.
                let slots: Vec<Option<usize>> =
                    std::iter::once(None).chain((0..model.m).map(Some)).collect();
                for &from in &slots {
                    for &to in &slots {
                        if from == to {
                            continue;
                        }
                        let mut trial = counts.clone();
                        if let Some(f) = from {
                            let j = model.count_index(ci, f);
                            if trial[j] == 0 {
                                continue;
                            }
                            trial[j] -= 1;
                        }
                        if let Some(t) = to {
                            trial[model.count_index(ci, t)] += 1;
                        }
                        if let Some(v) = self.offer(&trial) {
                            if v < best {
                                best = v;
                                counts = trial;
                                moved = true;
                            }
                        }
                    }
                }
            }
            if !moved {
                break;
            }
        }
    }
}

/// Solve the allocation program to the requested gap by best-first
/// branch-and-bound over the aggregated model.
pub fn solve(problem: &AllocationProblem, options: &SolveOptions) -> Result<AllocationSolution> {
    let started = Instant::now();
    let model = build_model(problem)?;
    let mut search = Search {
        model: &model,
        incumbent: None,
    };
    let tol = |inc: f64| options.gap_tol * inc.abs().max(1.0);
    let close_tol = |v: f64| 1e-10 * v.abs().max(1.0);

    let (lb, ub) = model.root_bounds();
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    let mut nodes = 0u64;
    let mut pruned_bound = f64::INFINITY;
    let mut limit_hit = false;
    let mut first = true;
    if !model.trivially_infeasible(&lb, &ub) {
        heap.push(Node {
            lb,
            ub,
            bound: f64::NEG_INFINITY,
            seq,
        });
    }

    while let Some(node) = heap.pop() {
        let inc = search.upper();
        if node.bound >= inc - tol(inc) {
            pruned_bound = pruned_bound.min(node.bound);
            continue;
        }
        if nodes >= options.node_limit {
            limit_hit = true;
            pruned_bound = pruned_bound.min(node.bound);
            heap.clear();
            break;
        }
        nodes += 1;
        let relax = model.relax(&node.lb, &node.ub);
        let bound = relax.bound.max(node.bound) + options.bound_bias;
        let z: Vec<f64> = relax.z.iter().cloned().collect();
        if relax.bound.is_finite() {
            let rounded = search.round(&z);
            if first {
                search.improve(rounded);
                first = false;
            } else {
                search.offer(&rounded);
            }
        }
        let inc = search.upper();
        if bound >= inc - tol(inc) {
            pruned_bound = pruned_bound.min(bound);
            continue;
        }

        // Relaxation flags first, then configurations, then counts: fixing
        // the binaries is what tightens the big-M margin rows.
        let frac = |j: usize| (z[j] - z[j].round()).abs();
        let tier = |j: usize| {
            if j >= model.n_int - model.m {
                2
            } else if j >= model.num_counts() {
                1
            } else {
                0
            }
        };
        let branch = (0..model.n_int)
            .filter(|&j| node.lb[j] < node.ub[j] && frac(j) > INT_TOL)
            .max_by(|&a, &b| {
                tier(a)
                    .cmp(&tier(b))
                    .then(frac(a).total_cmp(&frac(b)))
                    .then(b.cmp(&a))
            });
        let (var, split) = match branch {
            Some(j) => (j, z[j].floor()),
            None => {
                let counts: Vec<usize> = z[..model.num_counts()]
                    .iter()
                    .map(|v| v.round() as usize)
                    .collect();
                search.improve(counts.clone());
                let exact = search.value_of(&counts);
                // Solved only if the rigorous bound certifies the integral
                // point; otherwise keep splitting until domains are fixed.
                if relax.violation <= 1e-9 && bound >= exact - close_tol(exact) {
                    pruned_bound = pruned_bound.min(bound);
                    continue;
                }
                match (0..model.n_int)
                    .filter(|&j| node.lb[j] < node.ub[j])
                    .max_by(|&a, &b| {
                        (node.ub[a] - node.lb[a])
                            .total_cmp(&(node.ub[b] - node.lb[b]))
                            .then(b.cmp(&a))
                    }) {
                    Some(j) => {
                        let v = z[j].round();
                        (j, if v >= node.ub[j] { v - 1.0 } else { v })
                    }
                    None => {
                        pruned_bound = pruned_bound.min(exact);
                        continue;
                    }
                }
            }
        };
        for (lo, hi) in [(node.lb[var], split), (split + 1.0, node.ub[var])] {
            let mut lb = node.lb.clone();
            let mut ub = node.ub.clone();
            lb[var] = lo;
            ub[var] = hi;
            if model.trivially_infeasible(&lb, &ub) {
                continue;
            }
            seq += 1;
            heap.push(Node { lb, ub, bound, seq });
        }
    }

    let Some(inc) = search.incumbent else {
        return Err(Error::Infeasible(if limit_hit {
            "node limit reached before any feasible allocation was found".into()
        } else {
            infeasibility_report(problem)
        }));
    };
    let mut solution = inc.solution;
    solution.stats = SolverStats {
        nodes,
        gap: (solution.objective - pruned_bound).max(0.0),
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        node_limit_hit: limit_hit,
    };
    if !pruned_bound.is_finite() {
        solution.stats.gap = 0.0;
    }
    Ok(solution)
}

/// Lower bound from the root relaxation.
pub fn relaxation_bound(problem: &AllocationProblem) -> Result<f64> {
    let model = build_model(problem)?;
    let (lb, ub) = model.root_bounds();
    if model.trivially_infeasible(&lb, &ub) {
        return Ok(f64::INFINITY);
    }
    Ok(model.relax(&lb, &ub).bound)
}

/// Explain why no allocation exists, naming the violated constraint family.
fn infeasibility_report(problem: &AllocationProblem) -> String {
    let eligible: Vec<usize> = (0..problem.num_robots())
        .filter(|&i| problem.is_eligible(i))
        .collect();
    let lambda = problem.species.lambda();
    let q = problem.capabilities.matrix();
    for t in 0..problem.num_tasks() {
        for cap in 0..problem.num_capabilities() {
            let mut per_species = vec![0usize; lambda.len()];
            for &i in &eligible {
                per_species[problem.species.species_of(i)] += 1;
            }
            let best: f64 = per_species
                .iter()
                .enumerate()
                .map(|(s, &n)| n.min(lambda[s]) as f64 * q[(s, cap)])
                .sum::<f64>()
                * (1.0 - problem.degradation[(t, cap)]);
            let easiest = problem.requirements[t]
                .column(cap)
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if best - easiest < -problem.delta_max {
                return format!(
                    "capability margin (δ ≥ −φ·δ_max) cannot hold for task {t}, capability {cap}: \
                     every eligible robot together leaves a margin of {} below −δ_max = {}",
                    best - easiest,
                    -problem.delta_max
                );
            }
        }
    }
    "capability margins (δ ≥ −φ·δ_max) cannot hold for all tasks jointly under species \
     availability (1ᵀAPᵀ ≤ λᵀ), one task per robot and exclusion of degraded robots"
        .into()
}
