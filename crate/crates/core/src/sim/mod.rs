//! Scenario execution: configuration files, the event-triggered allocation
//! loop, built-in scenarios, randomized trials and trace output.

mod config;
mod runner;
mod scenarios;
mod trace;
mod trials;

pub use config::{ScenarioConfig, SimParams, TaskConfig, TeamConfig};
pub use runner::{apply_allocation, run_scenario, Allocation, RunOptions};
pub use trace::{
    DegradationRow, Event, EventKind, MarginRow, RobotRow, SimTrace, Summary, TriggerReason,
};
pub use scenarios::{
    builtin, builtin_scenarios, coverage_tracking, coverage_tracking_large, example1, example2,
    initial_problem, mission, ring, scaled_problem, station_positions, MissionLayout, AERIAL,
    BUILTIN, GROUND, TEAM_Q,
};
pub use trials::{
    fault_times, margin_tolerance, slowest_recovery, persistently_negative, randomized_trials, recovers_after_faults, RECOVERY_HORIZON,
    trial_config, trial_rng, Randomize, TrialOutcome, TrialReport, WorstMarginRow, PARAM_SPREAD,
    POSITION_JITTER, TIMING_JITTER,
};
