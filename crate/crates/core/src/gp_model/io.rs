//! JSON model files.
//!
//! ```json
//! {
//!   "format": "hucrl-gp-model",
//!   "version": 1,
//!   "kernel": { "lengthscales": [...], "signal_variance": 1.0, "noise_variance": 1e-4 },
//!   "dataset": { "state_dim": 2, "action_dim": 1, "angle_dims": [0],
//!                "states": [[...]], "actions": [[...]], "targets": [[...]] }
//! }
//! ```
//!
//! The Cholesky factor is not stored; loading refits the posterior.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::dataset::GpDataset;
use super::kernel::KernelParams;
use super::posterior::GpPosterior;
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "hucrl-gp-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub kernel: KernelParams,
    pub dataset: GpDataset,
}

impl ModelFile {
    pub fn from_posterior(post: &GpPosterior) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            kernel: post.kernel().clone(),
            dataset: post.dataset().clone(),
        }
    }

    pub fn into_posterior(self) -> Result<GpPosterior> {
        if self.format != MODEL_FORMAT {
            return Err(Error::ModelFile(format!("unknown format {:?}", self.format)));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::ModelFile(format!("unsupported version {}", self.version)));
        }
        GpPosterior::fit(self.dataset, self.kernel)
    }
}

pub fn save_model(post: &GpPosterior, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(&ModelFile::from_posterior(post))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<GpPosterior> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    file.into_posterior()
}
