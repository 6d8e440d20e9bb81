//! Reproducible experiment runner for the `univport` library.
//!
//! Each scenario reads one TOML config, writes CSV tables and a
//! `manifest.toml` into an output directory, and reports pass or fail
//! against the tolerances in the config.

pub mod config;
mod scenarios;

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub use config::Scenario;
pub use scenarios::fit_slope;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Library(#[from] univport::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Result of a scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    /// Named headline numbers, also written to `summary.csv`.
    pub summary: Vec<(String, f64)>,
    /// Human-readable notes, e.g. the located counterexample of a failed check.
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            0
        } else {
            1
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.summary.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

/// Runs `scenario` with the config at `config_path`, writing into `out`.
pub fn run(
    scenario: Scenario,
    config_path: &Path,
    out: &Path,
    seed_override: Option<u64>,
) -> Result<Outcome, CliError> {
    let bytes =
        fs::read(config_path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::Config("config is not UTF-8".into()))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let prepared = scenarios::prepare(scenario, &text, seed_override)?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let seed = prepared.seed();
    let outcome = prepared.execute(out)?;
    scenarios::write_summary(out, &outcome)?;
    write_manifest(out, scenario, &digest, seed, outcome.passed)?;
    Ok(outcome)
}

fn write_manifest(out: &Path, scenario: Scenario, digest: &str, seed: u64, passed: bool) -> Result<(), CliError> {
    let mut table = toml::Table::new();
    table.insert("scenario".into(), scenario.name().into());
    table.insert("status".into(), if passed { "pass" } else { "fail" }.into());
    table.insert("seed".into(), toml::Value::String(seed.to_string()));
    table.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    table.insert("config_sha256".into(), digest.into());
    let text = toml::to_string(&table).map_err(|e| CliError::Config(e.to_string()))?;
    let path = out.join("manifest.toml");
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}
