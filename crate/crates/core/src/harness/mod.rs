//! Experiment orchestration: configuration, persisted artifacts and the
//! commands behind the CLI.

mod commands;
mod config;
pub mod data;
pub mod svg;

pub use commands::*;
pub use config::{ExperimentConfig, NoisePreset};
