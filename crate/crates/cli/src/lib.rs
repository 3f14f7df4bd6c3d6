//! Batch front end for the warpflow solvers: config validation, run orchestration,
//! CSV/JSON artifacts, and the aggregated acceptance verdict.

pub mod config;
pub mod run;

pub use config::{parse_config, parse_str, ConfigError, Mode, Overrides, RunConfig, Violation};
pub use run::{report, run_command, RunError, Summary, Verdict, VerdictDocument};
