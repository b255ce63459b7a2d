//! Run driver for the `ymhd` simulator: configuration, presets, the experiment
//! pipeline and its CSV/JSON/SVG artifacts.

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod run;
pub mod svg;

pub use config::RunConfig;
pub use error::CliError;
pub use run::{run_experiment, RunSummary};
