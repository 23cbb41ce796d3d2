//! Command-line experiment driver: TOML configs, figure recipes and
//! deterministic CSV output.

pub mod config;
pub mod output;
pub mod recipes;
pub mod run;

pub use config::{ConfigError, Experiment, LoadedConfig, RunConfig};
pub use run::{run, RunError, RunReport};
