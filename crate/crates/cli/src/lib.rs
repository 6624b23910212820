//! Config-driven experiment pipeline on top of `aet-core`: phantom →
//! simulate → focus → reconstruct, plus figure export and metrics.

pub mod config;
pub mod error;
pub mod export;
pub mod pipeline;

pub use config::{preset, RunConfig, PRESETS};
pub use error::CliError;
