use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use typicality::experiment::{default_thresholds, validate_thresholds, AnalysisOptions, SweepConfig, SweepGrid};
use typicality::model::{MemoryBudget, ModelParams};
use typicality::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub memory_budget_gib: Option<f64>,
    pub threads: Option<usize>,
    pub cache: Option<PathBuf>,
}

/// Everything a subcommand may need. Sections a command does not use are
/// ignored by it but still validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelParams>,
    pub sweep: Option<SweepGrid>,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    #[serde(default)]
    pub run: RunSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: None,
            sweep: None,
            thresholds: default_thresholds(),
            analysis: AnalysisOptions::default(),
            run: RunSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig = toml::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(model) = &self.model {
            model.validate()?;
        }
        if let Some(grid) = &self.sweep {
            grid.validate()?;
        }
        validate_thresholds(&self.thresholds)?;
        self.analysis.validate()?;
        if let Some(gib) = self.run.memory_budget_gib {
            if !(gib > 0.0 && gib.is_finite()) {
                return Err(Error::InvalidConfig(format!("memory_budget_gib must be positive, got {gib}")));
            }
        }
        if self.run.threads == Some(0) {
            return Err(Error::InvalidConfig("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn budget(&self) -> MemoryBudget {
        self.run
            .memory_budget_gib
            .map_or_else(MemoryBudget::default, MemoryBudget::from_gib)
    }

    pub fn require_model(&self) -> Result<ModelParams> {
        self.model
            .ok_or_else(|| Error::InvalidConfig("the config has no [model] section".into()))
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let grid = self
            .sweep
            .clone()
            .ok_or_else(|| Error::InvalidConfig("the config has no [sweep] section".into()))?;
        Ok(SweepConfig {
            grid,
            thresholds: self.thresholds.clone(),
            analysis: self.analysis,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
