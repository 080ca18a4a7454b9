//! Declarative scenarios: config schema, the simulation world, sweeps and
//! output files.

pub mod bundled;
pub mod config;
pub mod output;
pub mod sim;
pub mod sweep;

pub use bundled::{bundled, bundled_json, bundled_names, BUNDLED};
pub use config::{ConfigError, ScenarioConfig};
pub use output::{render_summary, write_outputs, OutputOptions};
pub use sim::{run_scenario, run_scenario_with, RunOptions, RunOutput, SimError};
pub use sweep::{sweep, with_param, write_sweep_csv, SweepError, SweepRow};

/// Load a config from a file path, or a bundled scenario by name when no
/// such file exists.
pub fn load(source: &str) -> Result<ScenarioConfig, ConfigError> {
    let path = std::path::Path::new(source);
    if !path.exists() {
        if let Some(cfg) = bundled(source) {
            return cfg;
        }
    }
    ScenarioConfig::from_file(path)
}
