use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

use super::config::RunConfig;
use crate::error::{Error, Result};

pub const MANIFEST_FORMAT: &str = "hucrl-run-manifest";
pub const MANIFEST_VERSION: u32 = 1;
pub const CURVE_HEADER: [&str; 6] = ["episode", "return", "complexity", "coverage", "regret", "config_hash"];

/// SHA-256 of the config's compact JSON form, hex encoded.
pub fn config_hash(config: &RunConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// 1-based episode index.
    pub index: usize,
    #[serde(rename = "return")]
    pub episode_return: f64,
    /// Sum over visited `(s, u)` of the squared norm of the pre-episode std.
    pub complexity_increment: f64,
    /// Fraction of the episode's transitions inside the pre-episode band.
    pub coverage: f64,
    pub coverage_beta: f64,
    /// Confidence scaling used by the strategy this episode.
    pub beta: f64,
    /// Largest `||s_t - s_0||` along the episode.
    pub max_state_norm: f64,
    pub longest_upright: usize,
    pub solved: bool,
    /// Training points kept after refitting on this episode's data.
    pub retained_points: usize,
    pub total_points: usize,
    pub wall_ms: u64,
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    /// Always "true-dynamics planner": an empirical stand-in for the optimal
    /// return, not the optimum itself.
    pub kind: String,
    pub mean_return: f64,
    pub returns: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub crate_version: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub total_seeds: usize,
    pub oracle: Option<OracleSummary>,
    pub episodes: Vec<EpisodeRecord>,
    pub cumulative_complexity: f64,
    /// First solving episode, if any.
    pub solved_episode: Option<usize>,
    pub completed: bool,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(config: RunConfig) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            crate_version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash(&config),
            config,
            total_seeds: 1,
            oracle: None,
            episodes: Vec::new(),
            cumulative_complexity: 0.0,
            solved_episode: None,
            completed: false,
            error: None,
        }
    }

    pub fn returns(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.episode_return).collect()
    }

    pub fn final_return(&self) -> Option<f64> {
        self.episodes.last().map(|e| e.episode_return)
    }

    /// Whether the last recorded episode meets the solve criterion.
    pub fn final_solved(&self) -> bool {
        self.episodes.last().is_some_and(|e| e.solved)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: RunManifest = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
            return Err(Error::ModelFile(format!(
                "{}: expected {MANIFEST_FORMAT} v{MANIFEST_VERSION}, found {} v{}",
                path.display(),
                m.format,
                m.version
            )));
        }
        Ok(m)
    }
}

/// Learning curve: cumulative complexity and cumulative regret per episode.
/// The regret column is empty without an oracle. Wall time is left out so
/// the file is a pure function of the config.
pub fn write_curve_csv<W: Write>(manifest: &RunManifest, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_HEADER)?;
    let regret = manifest
        .oracle
        .as_ref()
        .map(|o| super::diagnostics::regret_curve(&manifest.returns(), o.mean_return));
    let mut complexity = 0.0;
    for (i, e) in manifest.episodes.iter().enumerate() {
        complexity += e.complexity_increment;
        let r = regret.as_ref().map_or(String::new(), |r| r[i].to_string());
        w.write_record([
            e.index.to_string(),
            e.episode_return.to_string(),
            complexity.to_string(),
            e.coverage.to_string(),
            r,
            manifest.config_hash.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
