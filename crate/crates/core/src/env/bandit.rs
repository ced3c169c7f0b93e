use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp_model::{GpDataset, GpPosterior, KernelParams};
use crate::rng::{derive, Stream};

/// Gaussian bump `height * exp(-(x - center)^2 / (2 width^2))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    pub height: f64,
}

impl Bump {
    fn eval(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.width;
        self.height * (-0.5 * z * z).exp()
    }
}

/// Noisy black-box maximization of a fixed function on an interval grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditProblem {
    pub lo: f64,
    pub hi: f64,
    pub grid_size: usize,
    pub bumps: Vec<Bump>,
    pub noise_std: f64,
}

impl Default for BanditProblem {
    /// Two bumps on `[0, 1]`: a decoy of height 0.4 at 0.2 and the global
    /// maximum of height 1 at 0.75, on a 101-point grid.
    fn default() -> Self {
        Self {
            lo: 0.0,
            hi: 1.0,
            grid_size: 101,
            bumps: vec![
                Bump {
                    center: 0.2,
                    width: 0.06,
                    height: 0.4,
                },
                Bump {
                    center: 0.75,
                    width: 0.06,
                    height: 1.0,
                },
            ],
            noise_std: 0.01,
        }
    }
}

impl BanditProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) || self.grid_size < 2 {
            return Err(Error::InvalidConfig("bandit: need lo < hi and at least 2 grid points".into()));
        }
        if self.bumps.is_empty() || self.bumps.iter().any(|b| !(b.width > 0.0)) {
            return Err(Error::InvalidConfig("bandit: need bumps with positive width".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidConfig("bandit: noise_std must be >= 0".into()));
        }
        Ok(())
    }

    pub fn objective(&self, x: f64) -> f64 {
        self.bumps.iter().map(|b| b.eval(x)).sum()
    }

    pub fn grid(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.grid_size - 1) as f64;
        (0..self.grid_size).map(|i| self.lo + step * i as f64).collect()
    }

    /// Grid index nearest to `x`.
    pub fn nearest_index(&self, x: f64) -> usize {
        let step = (self.hi - self.lo) / (self.grid_size - 1) as f64;
        (((x - self.lo) / step).round().max(0.0) as usize).min(self.grid_size - 1)
    }

    pub fn argmax_index(&self) -> usize {
        argmax(self.grid().iter().map(|&x| self.objective(x)))
    }

    /// SE kernel with lengthscale near the bump width and noise-matched variance.
    pub fn default_kernel(&self) -> Result<KernelParams> {
        KernelParams::new(vec![0.1], 1.0, self.noise_std.powi(2).max(1e-6))
    }
}

/// First index of the maximum; NaN never wins.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Grid index maximizing `mean + beta * std`; ties go to the lowest index.
pub fn gp_ucb_select(post: &GpPosterior, beta: f64, grid: &[f64]) -> Result<usize> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty grid".into()));
    }
    let pred = post.predict_batch(grid, &[], grid.len(), true)?;
    Ok(argmax((0..grid.len()).map(|i| pred.mean[i] + beta * pred.std[i])))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditTrace {
    pub beta: f64,
    /// Selected grid index per round; round 0 is the initial query.
    pub selections: Vec<usize>,
    pub observations: Vec<f64>,
}

/// Runs `rounds` evaluations starting from the grid point nearest to
/// `start`, refitting the GP after each noisy observation.
pub fn run_bandit(
    problem: &BanditProblem,
    kernel: &KernelParams,
    beta: f64,
    start: f64,
    rounds: usize,
    seed: u64,
) -> Result<BanditTrace> {
    problem.validate()?;
    let grid = problem.grid();
    let mut rng = derive(seed, Stream::Env, &[]);
    let mut data = GpDataset::new(1, 0);
    let mut trace = BanditTrace {
        beta,
        selections: Vec::with_capacity(rounds),
        observations: Vec::with_capacity(rounds),
    };
    let mut next = problem.nearest_index(start);
    for round in 0..rounds {
        if round > 0 {
            let post = GpPosterior::fit(data.clone(), kernel.clone())?;
            next = gp_ucb_select(&post, beta, &grid)?;
        }
        let x = grid[next];
        let y = problem.objective(x) + problem.noise_std * rng.sample::<f64, _>(StandardNormal);
        data.push(&[x], &[], &[y])?;
        trace.selections.push(next);
        trace.observations.push(y);
    }
    Ok(trace)
}
