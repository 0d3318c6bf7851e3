use std::path::{Path, PathBuf};

use serde::Deserialize;
use solarec::clustering::Init;
use solarec::profiles::{Layout, Normalization};

use crate::CliError;

/// Defaults read from `--config`. Explicit flags win over every field here.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub quiet: Option<bool>,
    pub days: Option<u32>,
    pub noise_sigma: Option<f64>,
    pub pv_kw: Option<f64>,
    pub k: Option<usize>,
    pub init: Option<Init>,
    pub layout: Option<Layout>,
    pub normalization: Option<Normalization>,
    pub tolerance: Option<f64>,
    pub max_iter: Option<usize>,
    pub restarts: Option<usize>,
    pub min_coverage: Option<f64>,
    pub policy: Option<PathBuf>,
    pub host: Option<String>,
    pub port: Option<u16>,
    pub snapshot: Option<PathBuf>,
    pub cors_origin: Option<String>,
    pub static_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))
    }
}
