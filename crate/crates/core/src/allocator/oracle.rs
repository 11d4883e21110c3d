use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use nalgebra::DMatrix;

use super::bnb::{solve, SolveOptions};
use super::problem::{AllocationProblem, AllocationSolution, SolverStats};
use crate::error::{Error, Result};
use crate::team::{CapabilityMatrix, SpeciesMapping};

/// Largest search space the oracle will enumerate.
pub const ENUMERATION_LIMIT: f64 = 1e7;

/// `(M + 1)^N · Π K_m · 2^M`.
pub fn search_space(problem: &AllocationProblem) -> f64 {
    let m = problem.num_tasks() as f64;
    let configs: f64 = problem.requirements.iter().map(|y| y.nrows() as f64).product();
    (m + 1.0).powi(problem.num_robots() as i32) * configs * 2f64.powi(problem.num_tasks() as i32)
}

fn advance(digits: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for (pos, d) in digits.iter_mut().enumerate() {
        *d += 1;
        if *d < radix(pos) {
            return true;
        }
        *d = 0;
    }
    false
}

/// Exhaustive ground truth: every assignment, configuration choice and
/// relaxation pattern is checked and scored. Exact ties go to the
/// lexicographically smallest `(φ, vec A, vec ι)`.
pub fn enumerate_optimal(problem: &AllocationProblem) -> Result<AllocationSolution> {
    problem.validate()?;
    let size = search_space(problem);
    if size > ENUMERATION_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: ENUMERATION_LIMIT,
        });
    }
    let (n, m) = (problem.num_robots(), problem.num_tasks());
    let lambda = problem.species.lambda();
    let mut best: Option<(f64, Vec<u8>, AllocationSolution)> = None;

    // digit 0 = idle, digit t + 1 = task t
    let mut a_digits = vec![0usize; n];
    loop {
        let assignment: Vec<Option<usize>> =
            a_digits.iter().map(|&d| d.checked_sub(1)).collect();
        let usage_ok = problem
            .species_usage(&assignment)
            .iter()
            .zip(lambda)
            .all(|(u, l)| u <= l);
        let eligible_ok = assignment
            .iter()
            .enumerate()
            .all(|(i, t)| t.is_none() || problem.is_eligible(i));
        if usage_ok && eligible_ok {
            let mut configs = vec![0usize; m];
            loop {
                let margins = problem.margins(&assignment, &configs);
                let mut phi = vec![false; m];
                loop {
                    let feasible = (0..m).all(|t| {
                        let floor = if phi[t] { -problem.delta_max } else { 0.0 };
                        margins.row(t).iter().all(|&v| v >= floor)
                    });
                    if feasible {
                        let objective = problem.objective(&assignment, &phi, &margins);
                        let key = problem.tie_key(&assignment, &configs, &phi);
                        let better = match &best {
                            None => true,
                            Some((bo, bk, _)) => objective < *bo || (objective == *bo && key < *bk),
                        };
                        if better {
                            best = Some((
                                objective,
                                key,
                                AllocationSolution {
                                    assignment: assignment.clone(),
                                    configs: configs.clone(),
                                    relaxed: phi.clone(),
                                    margins: margins.clone(),
                                    objective,
                                    stats: SolverStats::default(),
                                },
                            ));
                        }
                    }
                    if !advance_bool(&mut phi) {
                        break;
                    }
                }
                if !advance(&mut configs, |t| problem.requirements[t].nrows()) {
                    break;
                }
            }
        }
        if !advance(&mut a_digits, |_| m + 1) {
            break;
        }
    }
    best.map(|(_, _, s)| s)
        .ok_or_else(|| Error::Infeasible("no allocation satisfies the constraints".into()))
}

fn advance_bool(bits: &mut [bool]) -> bool {
    for b in bits.iter_mut() {
        if !*b {
            *b = true;
            return true;
        }
        *b = false;
    }
    false
}

/// Size limits for random instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceLimits {
    pub robots: usize,
    pub tasks: usize,
    pub capabilities: usize,
    pub configs: usize,
    pub species: usize,
}

impl Default for InstanceLimits {
    fn default() -> Self {
        InstanceLimits {
            robots: 5,
            tasks: 2,
            capabilities: 3,
            configs: 2,
            species: 3,
        }
    }
}

/// Seeded random small instance: sparse capabilities, partial degradation,
/// a random previous allocation and occasional excluded robots.
pub fn random_instance(rng: &mut impl Rng, limits: InstanceLimits) -> AllocationProblem {
    let n = rng.gen_range(0..=limits.robots);
    let m = rng.gen_range(1..=limits.tasks);
    let u = rng.gen_range(1..=limits.capabilities);
    let s = rng.gen_range(1..=limits.species);
    let q: Vec<Vec<f64>> = (0..s)
        .map(|_| {
            (0..u)
                .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.5..5.0) })
                .collect()
        })
        .collect();
    let species_of: Vec<usize> = (0..n).map(|_| rng.gen_range(0..s)).collect();
    let mut mapping = SpeciesMapping::from_species(s, species_of).expect("valid species ids");
    if rng.gen_bool(0.3) {
        let lambda = mapping
            .lambda()
            .iter()
            .map(|&c| if c > 0 { rng.gen_range(0..=c) } else { 0 })
            .collect();
        mapping = mapping.with_lambda(lambda).expect("λ within counts");
    }
    let requirements = (0..m)
        .map(|_| {
            let k = rng.gen_range(1..=limits.configs);
            DMatrix::from_fn(k, u, |_, _| {
                if rng.gen_bool(0.2) {
                    0.0
                } else {
                    rng.gen_range(0.0..8.0)
                }
            })
        })
        .collect();
    let degradation = DMatrix::from_fn(m, u, |_, _| {
        if rng.gen_bool(0.5) {
            0.0
        } else {
            rng.gen_range(0.0..1.0)
        }
    });
    AllocationProblem {
        capabilities: CapabilityMatrix::from_rows(&q).expect("nonnegative"),
        species: mapping,
        requirements,
        degradation,
        task_weights: (0..m).map(|_| rng.gen_range(0.0..20.0)).collect(),
        species_costs: (0..s).map(|_| rng.gen_range(0.0..2.0)).collect(),
        transition_costs: (0..m).map(|_| rng.gen_range(0.0..10.0)).collect(),
        previous: (0..n)
            .map(|_| {
                let t = rng.gen_range(0..=m);
                t.checked_sub(1)
            })
            .collect(),
        discrepancy: (0..n).map(|_| rng.gen_range(0.0..1.0)).collect(),
        relaxation_penalty: rng.gen_range(0.01..1.0),
        delta_max: if rng.gen_bool(0.7) {
            1000.0
        } else {
            rng.gen_range(1.0..10.0)
        },
        dv_thresh: 0.9,
    }
}

/// Instance `index` of the suite seeded by `seed`; each instance draws from
/// its own stream so it can be regenerated in isolation.
pub fn suite_instance(seed: u64, index: u64, limits: InstanceLimits) -> AllocationProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    random_instance(&mut rng, limits)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    pub instance: u64,
    /// `None` when that side found no feasible allocation.
    pub solver: Option<f64>,
    pub oracle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub instances: u64,
    pub tolerance: f64,
    pub mismatches: Vec<Mismatch>,
    /// Solutions that failed constraint replay.
    pub replay_failures: Vec<u64>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty() && self.replay_failures.is_empty()
    }
}

/// Compare `solve` against `enumerate_optimal` on a seeded random suite.
pub fn oracle_check(
    instances: u64,
    seed: u64,
    limits: InstanceLimits,
    options: &SolveOptions,
    tolerance: f64,
) -> Result<OracleReport> {
    let outcomes: Vec<Result<(Option<Mismatch>, bool)>> = (0..instances)
        .into_par_iter()
        .map(|k| {
            let problem = suite_instance(seed, k, limits);
            let objective = |r: Result<AllocationSolution>| match r {
                Ok(s) => Ok(Some(s)),
                Err(Error::Infeasible(_)) => Ok(None),
                Err(e) => Err(e),
            };
            let solved = objective(solve(&problem, options))?;
            let oracle = objective(enumerate_optimal(&problem))?;
            let replay_ok = solved
                .as_ref()
                .is_none_or(|s| problem.check_solution(s).is_ok());
            let (a, b) = (
                solved.as_ref().map(|s| s.objective),
                oracle.as_ref().map(|s| s.objective),
            );
            let agree = match (a, b) {
                (Some(x), Some(y)) => (x - y).abs() <= tolerance,
                (None, None) => true,
                _ => false,
            };
            let mismatch = (!agree).then_some(Mismatch {
                instance: k,
                solver: a,
                oracle: b,
            });
            Ok((mismatch, replay_ok))
        })
        .collect();
    let mut report = OracleReport {
        instances,
        tolerance,
        mismatches: Vec::new(),
        replay_failures: Vec::new(),
    };
    for (k, outcome) in outcomes.into_iter().enumerate() {
        let (mismatch, replay_ok) = outcome?;
        report.mismatches.extend(mismatch);
        if !replay_ok {
            report.replay_failures.push(k as u64);
        }
    }
    Ok(report)
}
