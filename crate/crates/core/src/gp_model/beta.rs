use serde::{Deserialize, Serialize};

use super::posterior::GpPosterior;
use crate::error::{Error, Result};

/// Width of the confidence band `|f - mu| <= beta * sigma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum BetaSchedule {
    Fixed { value: f64 },
    /// `beta = B + 4 sigma sqrt(I(y; f) + 1 + ln(1 / delta))` for targets with
    /// RKHS norm at most `bound` and sigma-sub-Gaussian noise.
    Rkhs { bound: f64, delta: f64 },
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule::Fixed { value: 1.0 }
    }
}

impl BetaSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BetaSchedule::Fixed { value } if !(value >= 0.0 && value.is_finite()) => {
                Err(Error::InvalidConfig("fixed beta must be finite and >= 0".into()))
            }
            BetaSchedule::Rkhs { bound, .. } if !(bound > 0.0 && bound.is_finite()) => {
                Err(Error::InvalidConfig("rkhs bound must be positive".into()))
            }
            BetaSchedule::Rkhs { delta, .. } if !(delta > 0.0 && delta < 1.0) => {
                Err(Error::InvalidConfig("rkhs delta must lie in (0, 1)".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn beta(&self, post: &GpPosterior) -> f64 {
        match *self {
            BetaSchedule::Fixed { value } => value,
            BetaSchedule::Rkhs { bound, delta } => {
                let noise_std = post.kernel().noise_variance.sqrt();
                let info = post.mutual_information();
                bound + 4.0 * noise_std * (info + 1.0 + (1.0 / delta).ln()).sqrt()
            }
        }
    }
}
