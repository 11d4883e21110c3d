//! Run the coverage-and-tracking mission, print its event log and write the
//! trace files. Usage: `mission [scenario] [out-dir]`.

use std::path::PathBuf;

use resalloc::sim::{builtin, run_scenario, EventKind, RunOptions};

fn main() -> resalloc::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "coverage_tracking".into());
    let out: Option<PathBuf> = args.next().map(Into::into);
    let config = builtin(&name).expect("unknown built-in scenario");
    let trace = run_scenario(&config, &RunOptions::default())?;
    for event in &trace.events {
        match &event.kind {
            EventKind::MiqpSolved { objective, nodes, .. } => {
                println!("{:6.2} s  solved: objective {objective:.2} in {nodes} nodes", event.t)
            }
            EventKind::AllocationApplied { .. } => {}
            kind => println!("{:6.2} s  {kind:?}", event.t),
        }
    }
    for task in 0..trace.num_tasks {
        println!("task {task}: min margin {:.2}", trace.summary.min_margins[task]);
    }
    if let Some(dir) = out {
        trace.write(&dir)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
