use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use hucrl::agent::RunConfig;
use hucrl::hallucination::StrategyTag;

/// The (strategy x rho x seed) grid over a base config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentMatrix {
    pub base: RunConfig,
    #[serde(default = "all_strategies")]
    pub strategies: Vec<StrategyTag>,
    #[serde(default = "default_rhos")]
    pub rhos: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Overrides the command line's `--out` when set.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn all_strategies() -> Vec<StrategyTag> {
    StrategyTag::ALL.to_vec()
}

fn default_rhos() -> Vec<f64> {
    vec![0.0, 0.1, 0.2]
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

impl Default for ExperimentMatrix {
    fn default() -> Self {
        Self {
            base: RunConfig::new(20),
            strategies: all_strategies(),
            rhos: default_rhos(),
            seeds: default_seeds(),
            output_dir: None,
        }
    }
}

impl ExperimentMatrix {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() || self.rhos.is_empty() || self.seeds.is_empty() {
            bail!("matrix needs at least one strategy, rho and seed");
        }
        for cell in self.cells() {
            cell.validate().context("invalid matrix cell")?;
        }
        Ok(())
    }

    /// One config per cell, in (strategy, rho, seed) order.
    pub fn cells(&self) -> Vec<RunConfig> {
        let mut out = Vec::new();
        for &strategy in &self.strategies {
            for &rho in &self.rhos {
                for &seed in &self.seeds {
                    let mut c = self.base.clone();
                    c.strategy.kind = strategy;
                    c.env.rho = rho;
                    c.seed = seed;
                    out.push(c);
                }
            }
        }
        out
    }
}

/// Strict JSON loading: unknown fields are rejected and parse errors carry
/// line and column.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim().is_empty() {
        bail!("{}: empty config file", path.display());
    }
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConfigFile {
    Run(RunConfig),
    Matrix(ExperimentMatrix),
}

/// Loads either kind of config; a top-level `base` key marks a matrix.
pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let value: serde_json::Value = load_json(path)?;
    let is_matrix = value.get("base").is_some();
    let ctx = || format!("parsing {}", path.display());
    Ok(if is_matrix {
        ConfigFile::Matrix(serde_json::from_value(value).with_context(ctx)?)
    } else {
        ConfigFile::Run(serde_json::from_value(value).with_context(ctx)?)
    })
}
