//! Scenario runner, reports and series cache behind the `qsd` command.

pub mod cache;
pub mod codec;
pub mod error;
pub mod run;
pub mod scenario;

pub use cache::{load_theory, Cache, CacheKey, Source};
pub use error::CliError;
pub use run::{exit_code, render_text, run_scenario, Report, Status};
pub use scenario::{parse_scenarios, Scenario, ScenarioSpec, Suite, DEFAULT_MAX_ORDER};
