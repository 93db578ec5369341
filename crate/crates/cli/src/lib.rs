//! Scenario-driven runner for the cooling, state-swap, coherent-control,
//! frame-validation, and sweep experiments. Configuration comes from TOML
//! files or named presets; every run emits a resolved-parameter echo, a
//! fixed-schema CSV time series, and a key = value summary.

pub mod config;
pub mod output;
pub mod presets;
pub mod scenario;

pub use config::{resolve, Engine, ResolvedScenario, ScenarioConfig};
pub use output::{RunReport, Series};
pub use presets::{preset, preset_names};
