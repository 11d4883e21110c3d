//! Randomized trials comparing event-triggered reallocation with a team
//! allocated once. Usage: `trials [env|params] [count]`.

use resalloc::cli::tracking_tasks;
use resalloc::sim::*;

fn main() -> resalloc::Result<()> {
    let mut args = std::env::args().skip(1);
    let randomize: Randomize = args.next().as_deref().unwrap_or("env").parse().expect("env or params");
    let count: usize = args.next().map_or(4, |n| n.parse().expect("trial count"));
    let base = coverage_tracking_large();
    let options = RunOptions {
        events_only: true,
        ..RunOptions::default()
    };
    let report = randomized_trials(&base, count, randomize, &options)?;
    let tasks = tracking_tasks(&base.tasks);
    let eps = margin_tolerance(&base, &tasks);
    for o in &report.outcomes {
        println!(
            "trial {:2}: {} solves, recovers {}, allocate-once persistently negative {}",
            o.index,
            o.adaptive.summary.solves,
            recovers_after_faults(&o.adaptive, &o.config, &tasks, eps, RECOVERY_HORIZON),
            persistently_negative(&o.baseline, &tasks, eps, RECOVERY_HORIZON)
        );
    }
    Ok(())
}
