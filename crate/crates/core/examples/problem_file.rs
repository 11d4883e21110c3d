//! Round-trip an allocation problem through its TOML file format and print
//! the JSON solution report, as `resalloc solve` does.

use resalloc::allocator::{solve, ProblemFile, SolutionReport, SolveOptions};
use resalloc::sim::{example1, initial_problem};

fn main() -> resalloc::Result<()> {
    let toml = ProblemFile::from_problem(&initial_problem(&example1())).to_toml_string();
    println!("{toml}");
    let problem = ProblemFile::from_toml_str(&toml)?.to_problem()?;
    let solution = solve(&problem, &SolveOptions::default())?;
    println!("{}", serde_json::to_string_pretty(&SolutionReport::new(&problem, &solution))?);
    Ok(())
}
