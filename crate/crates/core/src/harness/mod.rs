//! Seeded experiment runner: config parsing, orchestration and CSV output.
//!
//! Output starts with `# key=value` metadata (crate version, RNG identity,
//! effective seed and the echoed config as `# config.<key>=<value>`), then a
//! header row and the data rows.

mod config;
mod run;

pub use config::{
    format_f64, parse_config, ConfigError, ConfigErrors, ExperimentConfig, ExperimentKind, Sweep,
    SweepParam, SweepScale, KEYS,
};
pub use run::{echoed_config, run_experiment, RunError, RunOptions, RunSummary, VERSION};
