use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Squared-exponential kernel with one lengthscale per input dimension.
///
/// `k(x, x') = signal_variance * exp(-0.5 * sum_i ((x_i - x'_i) / l_i)^2)`;
/// `noise_variance` is the observation noise of the likelihood.
///
/// Output `i` may carry a scale `c_i`: its GP then uses kernel `c_i^2 k` and
/// noise `c_i^2 noise_variance`, which leaves the posterior mean unchanged
/// and multiplies the standard deviation by `c_i`. An empty list means all
/// ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub output_scales: Vec<f64>,
}

impl KernelParams {
    pub fn new(lengthscales: Vec<f64>, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        let k = Self {
            lengthscales,
            signal_variance,
            noise_variance,
            output_scales: Vec::new(),
        };
        k.validate()?;
        Ok(k)
    }

    pub fn isotropic(dim: usize, lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        Self::new(vec![lengthscale; dim], signal_variance, noise_variance)
    }

    pub fn with_output_scales(mut self, scales: Vec<f64>) -> Result<Self> {
        self.output_scales = scales;
        self.validate()?;
        Ok(self)
    }

    /// Standard-deviation multiplier of output `i`.
    pub fn output_scale(&self, i: usize) -> f64 {
        self.output_scales.get(i).copied().unwrap_or(1.0)
    }

    pub fn input_dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.lengthscales.is_empty() {
            return Err(Error::InvalidConfig("kernel needs at least one lengthscale".into()));
        }
        if !self.lengthscales.iter().all(|&l| positive(l)) {
            return Err(Error::InvalidConfig("lengthscales must be positive".into()));
        }
        if !positive(self.signal_variance) {
            return Err(Error::InvalidConfig("signal_variance must be positive".into()));
        }
        if !positive(self.noise_variance) {
            return Err(Error::InvalidConfig("noise_variance must be positive".into()));
        }
        if !self.output_scales.iter().all(|&c| positive(c)) {
            return Err(Error::InvalidConfig("output_scales must be positive".into()));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let d2: f64 = x
            .iter()
            .zip(y)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let r = (a - b) / l;
                r * r
            })
            .sum();
        self.signal_variance * (-0.5 * d2).exp()
    }

    pub(crate) fn inverse_lengthscales(&self) -> Vec<f64> {
        self.lengthscales.iter().map(|l| 1.0 / l).collect()
    }
}

/// Kernel-induced distance `sqrt(k(x,x) + k(x',x') - 2 k(x,x'))`.
pub fn kernel_metric(kernel: &KernelParams, x: &[f64], y: &[f64]) -> Result<f64> {
    let d = kernel.input_dim();
    for v in [x, y] {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                context: "kernel_metric",
                expected: d,
                got: v.len(),
            });
        }
    }
    let sq = kernel.eval(x, x) + kernel.eval(y, y) - 2.0 * kernel.eval(x, y);
    Ok(sq.max(0.0).sqrt())
}

/// `s2 * exp(-0.5 * |a - b|^2)` for inputs already divided by the lengthscales.
#[inline]
pub(crate) fn se_scaled(signal_variance: f64, a: &[f64], b: &[f64]) -> f64 {
    let mut d2 = 0.0;
    for (x, y) in a.iter().zip(b) {
        let r = x - y;
        d2 += r * r;
    }
    signal_variance * (-0.5 * d2).exp()
}
