use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Plateau-plus-Gaussian-tail shaping function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    pub lower: f64,
    pub upper: f64,
    pub margin: f64,
    #[serde(default = "default_value_at_margin")]
    pub value_at_margin: f64,
}

fn default_value_at_margin() -> f64 {
    0.1
}

impl ToleranceSpec {
    pub fn new(lower: f64, upper: f64, margin: f64) -> Self {
        Self {
            lower,
            upper,
            margin,
            value_at_margin: default_value_at_margin(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower <= self.upper) {
            return Err(Error::InvalidConfig("tolerance: lower must be <= upper".into()));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::InvalidConfig("tolerance: margin must be finite and >= 0".into()));
        }
        if !(self.value_at_margin > 0.0 && self.value_at_margin < 1.0) {
            return Err(Error::InvalidConfig("tolerance: value_at_margin must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// 1 on `[lower, upper]`; outside, `exp(-0.5 (d * scale)^2)` with `d` the
/// distance to the plateau in margins and `scale` chosen so that `d = 1`
/// gives `value_at_margin`. A zero margin is a hard indicator.
pub fn tolerance(x: f64, spec: &ToleranceSpec) -> f64 {
    if x >= spec.lower && x <= spec.upper {
        return 1.0;
    }
    if spec.margin == 0.0 {
        return 0.0;
    }
    let dist = if x < spec.lower { spec.lower - x } else { x - spec.upper };
    let d = dist / spec.margin;
    let scale = (-2.0 * spec.value_at_margin.ln()).sqrt();
    (-0.5 * (d * scale).powi(2)).exp()
}
