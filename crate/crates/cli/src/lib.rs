//! Scenario-driven front end for `fixpoint-core`: TOML scenario files in,
//! TOML reports, JSONL traces and CSV suite summaries out.

pub mod report;
pub mod runner;
pub mod scenario;

pub use runner::{run_scenario, run_suite, RunResult, SuiteResult};
pub use scenario::{Action, Overrides, Scenario, ScenarioError};
