//! Scenario runner: named experiments, config resolution, reports.

pub mod config;
pub mod report;
pub mod scenarios;

pub use config::ScenarioConfig;
pub use report::{EstimateRecord, PathRecord, Report, VerdictRecord};
pub use scenarios::{list_scenarios, run_scenario, HarnessError, ScenarioInfo, ScenarioOutput};
