//! Scenario files, Monte Carlo runner, metrics and report output.

pub mod report;
pub mod run;
pub mod scenario;

pub use report::{aggregate, compare, median, write_run_outputs, Comparison, Summary};
pub use run::{run_scenario, run_trial, run_trials, scenario_db, trial_seed, EpochRecord, RunReport};
pub use scenario::{Mode, Scenario};
