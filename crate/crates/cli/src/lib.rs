//! Command-line front end for `spin-collapse`: TOML configuration, experiment
//! drivers, and CSV / JSON / SVG writers.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod svg;

pub use commands::{run, Summary};
pub use config::{load_config, parse_config, Experiment, FileConfig, Overrides, Preset, RunConfig};
pub use error::{CliError, CliResult};
