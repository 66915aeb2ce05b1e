//! Scenario files, shipped presets and the runner.

pub mod config;
pub mod presets;
pub mod runner;

pub use config::{Scenario, ScenarioConfig};
pub use runner::{load_scenario, run_scenario, run_sweep, ScenarioRun, Summary, SweepReport};
