//! Scenario runner: simulation, planning and comparison commands that
//! write CSV and JSON artifacts.

pub mod compare;
pub mod error;
pub mod export;
pub mod run;

pub use compare::compare;
pub use error::{CliError, CliResult};
pub use run::{load_config, plan, simulate, Overrides};
