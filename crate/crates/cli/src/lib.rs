//! Command-line experiment runner for the `euler-align` core: JSON configs in,
//! CSV time series and JSON reports out, plus parameter sweeps and the pinned
//! acceptance suites.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod suites;
pub mod sweep;

pub use config::ExperimentConfig;
pub use error::CliError;
