//! JSON run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnalysisConfig, PulseModel, SourceSpec, SystemModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub source: SourceSpec,
    pub system: SystemModel,
    #[serde(default)]
    pub pulse: PulseModel,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.system.validate()?;
        self.pulse.validate()?;
        self.analysis.validate()
    }

    pub fn from_json_str(text: &str) -> Result<Config> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| {
            Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Read and validate a configuration file.
pub fn load_config(path: &Path) -> Result<(SourceSpec, SystemModel, PulseModel, AnalysisConfig)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let cfg = Config::from_json_str(&text)?;
    Ok((cfg.source, cfg.system, cfg.pulse, cfg.analysis))
}
