//! File emission: pretty JSON with sorted keys, CSV with a header row, and
//! the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nll_core::seeding::{GENERATOR, MIXING_FUNCTION};
use serde::Serialize;
use serde_json::Value;

use crate::{CliError, Classify};

/// Provenance of one invocation. Wall time is reported on standard error
/// only, so reruns stay byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: Option<String>,
    pub config_hash: Option<String>,
    /// The effective config, overrides applied.
    pub config: Option<Value>,
    pub master_seed: u64,
    pub mixing_function: String,
    pub generator: String,
    pub code_version: String,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    pub overrides: BTreeMap<String, Value>,
}

impl RunManifest {
    pub fn new(subcommand: &str, master_seed: u64) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            config_path: None,
            config_hash: None,
            config: None,
            master_seed,
            mixing_function: MIXING_FUNCTION.to_string(),
            generator: GENERATOR.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
            overrides: BTreeMap::new(),
        }
    }

    pub fn write(&mut self, dir: &Path) -> Result<(), CliError> {
        self.outputs.push("manifest.json".into());
        write_json(&dir.join("manifest.json"), self)
    }
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| anyhow::anyhow!("cannot create {}: {e}", dir.display()))
        .or_runtime()
}

/// Pretty JSON; going through `Value` sorts every object's keys.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    let value = serde_json::to_value(value).or_runtime()?;
    Ok(serde_json::to_string_pretty(&value).or_runtime()? + "\n")
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = to_json_string(value)?;
    fs::write(path, text)
        .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))
        .or_runtime()
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path)
        .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))
        .or_runtime()
}

pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Column label for a quantile level, e.g. `q0.5`.
pub fn quantile_column(prefix: &str, level: f64) -> String {
    format!("{prefix}_q{level}")
}
