//! Config-driven experiment runner for `rff_dokl`.

pub mod analyze;
pub mod bundled;
pub mod config;
pub mod experiment;

pub use analyze::analyze;
pub use bundled::{bundled_config, list_experiments};
pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, RunError, RunSettings, Summary, SUMMARY_HEADER};

/// Reads a config from a file path, falling back to a bundled name.
pub fn load_config(spec: &str) -> Result<ExperimentConfig, RunError> {
    let path = std::path::Path::new(spec);
    let text = if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| RunError::Data(format!("{spec}: {e}")))?
    } else if let Some(text) = bundled_config(spec) {
        text.to_string()
    } else {
        return Err(RunError::Config(ConfigError {
            key: None,
            line: None,
            message: format!("`{spec}` is neither a config file nor a bundled experiment"),
        }));
    };
    Ok(ExperimentConfig::parse(&text)?)
}
