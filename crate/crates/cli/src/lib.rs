//! Scenario files, pipeline orchestration and result emission for `lrspin`.

pub mod checks;
pub mod config;
pub mod runner;
pub mod stages;
pub mod table;

pub use checks::{CheckName, Format, Status};
pub use config::{parse_config, ConfigError, ConfigErrors, ScenarioConfig};
pub use runner::{exit_code, run_scenario, RunReport, ScenarioRun};
