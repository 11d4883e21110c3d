//! Solve one allocation problem and compare it with exhaustive enumeration.

use resalloc::allocator::{enumerate_optimal, solve, SolveOptions};
use resalloc::sim::{coverage_tracking, example1, initial_problem};

fn main() -> resalloc::Result<()> {
    let problem = initial_problem(&coverage_tracking());
    let solution = solve(&problem, &SolveOptions::default())?;
    println!("assignment {:?}", solution.assignment);
    println!("configurations {:?}, relaxed {:?}", solution.configs, solution.relaxed);
    println!("{:?}", problem.objective_terms(&solution.assignment, &solution.relaxed, &solution.margins));
    println!(
        "objective {:.3}, {} nodes, gap {:.1e}",
        solution.objective, solution.stats.nodes, solution.stats.gap
    );
    for (m, row) in solution.margins.row_iter().enumerate() {
        println!("task {m} margins {:?}", row.iter().collect::<Vec<_>>());
    }

    // Small problems can be cross-checked by brute force.
    let small = initial_problem(&example1());
    let exact = SolveOptions {
        gap_tol: 0.0,
        ..SolveOptions::default()
    };
    let bnb = solve(&small, &exact)?;
    let brute = enumerate_optimal(&small)?;
    println!("example 1: branch and bound {:.6}, enumeration {:.6}", bnb.objective, brute.objective);
    Ok(())
}
