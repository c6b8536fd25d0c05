//! Configuration loading and task execution behind the `supou` binary.

pub mod config;
pub mod error;
pub mod run;

pub use config::{load_config, EstimateConfig, RunConfig, Task};
pub use error::CliError;
pub use run::{run, Outcome};
