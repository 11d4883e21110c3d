//! Resilient task allocation: the mixed-integer quadratic program, its
//! branch-and-bound solver and an exhaustive oracle for small instances.

mod bnb;
mod file;
mod model;
mod oracle;
mod problem;
pub mod qp;

pub use bnb::{relaxation_bound, solve, SolveOptions};
pub use file::{ProblemFile, SolutionReport};
pub use model::{build_model, AllocationModel, ModelDimensions, RobotClass};
pub use oracle::{
    enumerate_optimal, oracle_check, random_instance, search_space, suite_instance, InstanceLimits,
    Mismatch, OracleReport, ENUMERATION_LIMIT,
};
pub use problem::{allocation_matrix, AllocationProblem, AllocationSolution, ObjectiveTerms, SolverStats};
