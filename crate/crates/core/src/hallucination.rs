//! One-step transition functions built from a fitted model.
//!
//! Every exploration strategy reduces to planning against some
//! [`Dynamics`]: greedy exploitation samples from the one-step predictive
//! Gaussian, Thompson sampling evaluates one frozen function draw, and the
//! optimistic strategy adds a hallucinated control `eta in [-1, 1]^p` that
//! moves the next state anywhere inside `mean +- beta * std`.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::angle::wrap_angle;
use crate::error::{Error, Result};
use crate::gp_model::{GpPosterior, RffSample};
use crate::rng::Rng;

/// A true action paired with a hallucinated one. `eta` is empty for
/// strategies without hallucination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedAction {
    pub u: Vec<f64>,
    pub eta: Vec<f64>,
}

impl AugmentedAction {
    pub fn plain(u: Vec<f64>) -> Self {
        Self { u, eta: Vec::new() }
    }

    pub fn new(u: Vec<f64>, eta: Vec<f64>) -> Self {
        Self { u, eta }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyTag {
    Greedy,
    Thompson,
    Hucrl,
}

impl StrategyTag {
    pub const ALL: [StrategyTag; 3] = [StrategyTag::Greedy, StrategyTag::Thompson, StrategyTag::Hucrl];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyTag::Greedy => "greedy",
            StrategyTag::Thompson => "thompson",
            StrategyTag::Hucrl => "hucrl",
        }
    }
}

impl fmt::Display for StrategyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(StrategyTag::Greedy),
            "thompson" => Ok(StrategyTag::Thompson),
            "hucrl" => Ok(StrategyTag::Hucrl),
            other => Err(Error::InvalidConfig(format!(
                "unknown strategy {other:?} (expected greedy, thompson or hucrl)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Strategy {
    /// Sample the next state from the predictive Gaussian at the particle;
    /// with `sample_epistemic = false` the mean is used.
    Greedy { sample_epistemic: bool },
    Thompson(Arc<RffSample>),
    HUcrl { beta: f64 },
}

impl Strategy {
    pub fn tag(&self) -> StrategyTag {
        match self {
            Strategy::Greedy { .. } => StrategyTag::Greedy,
            Strategy::Thompson(_) => StrategyTag::Thompson,
            Strategy::HUcrl { .. } => StrategyTag::Hucrl,
        }
    }
}

/// State transition used by the planner.
///
/// Batched states, actions and hallucinated inputs are row-major with one
/// row per particle; `rngs[i]` is the private stream of particle `i`, so a
/// batched step draws exactly what `count` single steps would.
pub trait Dynamics: Send + Sync {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Number of hallucinated inputs (0 unless the strategy is optimistic).
    fn eta_dim(&self) -> usize {
        0
    }

    fn step(&self, state: &[f64], action: &AugmentedAction, rng: &mut Rng) -> Result<Vec<f64>>;

    fn step_batch(&self, states: &mut [f64], u: &[f64], eta: &[f64], rngs: &mut [Rng]) -> Result<()> {
        let p = self.state_dim();
        let q = self.action_dim();
        let h = self.eta_dim();
        for (i, rng) in rngs.iter_mut().enumerate() {
            let a = AugmentedAction::new(u[i * q..(i + 1) * q].to_vec(), eta[i * h..(i + 1) * h].to_vec());
            let next = self.step(&states[i * p..(i + 1) * p], &a, rng)?;
            states[i * p..(i + 1) * p].copy_from_slice(&next);
        }
        Ok(())
    }
}

fn add_process_noise(next: &mut [f64], noise: Option<&[f64]>, rng: &mut Rng) {
    if let Some(sigma) = noise {
        for (x, s) in next.iter_mut().zip(sigma) {
            *x += s * rng.sample::<f64, _>(StandardNormal);
        }
    }
}

fn wrap_dims(next: &mut [f64], angle_dims: &[usize]) {
    for &d in angle_dims {
        next[d] = wrap_angle(next[d]);
    }
}

/// Strategy-specific transition over one frozen model snapshot.
#[derive(Clone, Debug)]
pub struct DynamicsAdapter {
    strategy: Strategy,
    model: Arc<GpPosterior>,
    process_noise: Option<Vec<f64>>,
}

impl DynamicsAdapter {
    pub fn new(strategy: Strategy, model: Arc<GpPosterior>, process_noise: Option<Vec<f64>>) -> Result<Self> {
        let p = model.state_dim();
        if let Some(n) = &process_noise {
            if n.len() != p {
                return Err(Error::DimensionMismatch {
                    context: "process noise",
                    expected: p,
                    got: n.len(),
                });
            }
            if n.iter().any(|s| !(*s >= 0.0)) {
                return Err(Error::InvalidConfig("process noise std must be >= 0".into()));
            }
        }
        match &strategy {
            Strategy::HUcrl { beta } if !(*beta >= 0.0 && beta.is_finite()) => {
                return Err(Error::InvalidConfig("beta must be finite and >= 0".into()));
            }
            Strategy::Thompson(s) if s.state_dim() != p || s.action_dim() != model.action_dim() => {
                return Err(Error::DimensionMismatch {
                    context: "thompson sample",
                    expected: p,
                    got: s.state_dim(),
                });
            }
            _ => {}
        }
        Ok(Self {
            strategy,
            model,
            process_noise,
        })
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn model(&self) -> &GpPosterior {
        &self.model
    }

    fn noise(&self) -> Option<&[f64]> {
        self.process_noise.as_deref()
    }

    fn mismatch(&self, expected: &'static str) -> Error {
        Error::StrategyMismatch {
            expected,
            actual: self.strategy.tag().as_str(),
        }
    }

    fn finish(&self, mut next: Vec<f64>, rng: &mut Rng) -> Vec<f64> {
        add_process_noise(&mut next, self.noise(), rng);
        wrap_dims(&mut next, self.model.dataset().angle_dims());
        next
    }

    /// `s + mean + std * eps + omega` with `eps` standard normal.
    pub fn step_greedy(&self, s: &[f64], u: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        let Strategy::Greedy { sample_epistemic } = self.strategy else {
            return Err(self.mismatch("greedy"));
        };
        let pred = self.model.predict(s, u)?;
        let mut next = Vec::with_capacity(s.len());
        for i in 0..s.len() {
            let mut delta = pred.mean[i];
            if sample_epistemic {
                delta += pred.std[i] * rng.sample::<f64, _>(StandardNormal);
            }
            next.push(s[i] + delta);
        }
        Ok(self.finish(next, rng))
    }

    /// `s + mean + beta * std * eta + omega`.
    pub fn step_hallucinated(&self, s: &[f64], a: &AugmentedAction, rng: &mut Rng) -> Result<Vec<f64>> {
        let Strategy::HUcrl { beta } = self.strategy else {
            return Err(self.mismatch("hucrl"));
        };
        check_eta(&a.eta, s.len())?;
        let pred = self.model.predict(s, &a.u)?;
        let next = (0..s.len())
            .map(|i| s[i] + (pred.mean[i] + beta * pred.std[i] * a.eta[i]))
            .collect();
        Ok(self.finish(next, rng))
    }

    /// `s + sampled(s, u) + omega` for the episode's frozen function draw.
    pub fn step_thompson(&self, s: &[f64], u: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        let Strategy::Thompson(sample) = &self.strategy else {
            return Err(self.mismatch("thompson"));
        };
        let delta = sample.eval(s, u)?;
        let next = s.iter().zip(&delta).map(|(a, b)| a + b).collect();
        Ok(self.finish(next, rng))
    }
}

fn check_eta(eta: &[f64], p: usize) -> Result<()> {
    if eta.len() != p {
        return Err(Error::DimensionMismatch {
            context: "hallucinated input",
            expected: p,
            got: eta.len(),
        });
    }
    for (dim, &value) in eta.iter().enumerate() {
        if !(-1.0..=1.0).contains(&value) {
            return Err(Error::EtaOutOfBounds { dim, value });
        }
    }
    Ok(())
}

impl Dynamics for DynamicsAdapter {
    fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    fn action_dim(&self) -> usize {
        self.model.action_dim()
    }

    fn eta_dim(&self) -> usize {
        match self.strategy {
            Strategy::HUcrl { .. } => self.model.state_dim(),
            _ => 0,
        }
    }

    fn step(&self, state: &[f64], action: &AugmentedAction, rng: &mut Rng) -> Result<Vec<f64>> {
        match self.strategy {
            Strategy::Greedy { .. } => self.step_greedy(state, &action.u, rng),
            Strategy::Thompson(_) => self.step_thompson(state, &action.u, rng),
            Strategy::HUcrl { .. } => self.step_hallucinated(state, action, rng),
        }
    }

    fn step_batch(&self, states: &mut [f64], u: &[f64], eta: &[f64], rngs: &mut [Rng]) -> Result<()> {
        let p = self.state_dim();
        let count = rngs.len();
        let angle_dims = self.model.dataset().angle_dims();
        match &self.strategy {
            Strategy::Greedy { sample_epistemic } => {
                let pred = self.model.predict_batch(states, u, count, *sample_epistemic)?;
                for (i, rng) in rngs.iter_mut().enumerate() {
                    let row = &mut states[i * p..(i + 1) * p];
                    for o in 0..p {
                        let mut delta = pred.mean[i * p + o];
                        if *sample_epistemic {
                            delta += pred.std[i * p + o] * rng.sample::<f64, _>(StandardNormal);
                        }
                        row[o] += delta;
                    }
                    add_process_noise(row, self.noise(), rng);
                    wrap_dims(row, angle_dims);
                }
            }
            Strategy::Thompson(sample) => {
                let mut delta = vec![0.0; count * p];
                sample.eval_batch(states, u, count, &mut delta);
                for (i, rng) in rngs.iter_mut().enumerate() {
                    let row = &mut states[i * p..(i + 1) * p];
                    for o in 0..p {
                        row[o] += delta[i * p + o];
                    }
                    add_process_noise(row, self.noise(), rng);
                    wrap_dims(row, angle_dims);
                }
            }
            Strategy::HUcrl { beta } => {
                for i in 0..count {
                    check_eta(&eta[i * p..(i + 1) * p], p)?;
                }
                let pred = self.model.predict_batch(states, u, count, true)?;
                for (i, rng) in rngs.iter_mut().enumerate() {
                    let row = &mut states[i * p..(i + 1) * p];
                    for o in 0..p {
                        let k = i * p + o;
                        row[o] += pred.mean[k] + beta * pred.std[k] * eta[k];
                    }
                    add_process_noise(row, self.noise(), rng);
                    wrap_dims(row, angle_dims);
                }
            }
        }
        Ok(())
    }
}

/// Dynamics given directly as a deterministic function (zero epistemic
/// uncertainty), plus optional process noise. Used for the true simulator
/// and for the plain posterior-mean model.
pub struct KnownDynamics<F> {
    state_dim: usize,
    action_dim: usize,
    angle_dims: Vec<usize>,
    process_noise: Option<Vec<f64>>,
    f: F,
}

impl<F> KnownDynamics<F>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync,
{
    pub fn new(state_dim: usize, action_dim: usize, f: F) -> Self {
        Self {
            state_dim,
            action_dim,
            angle_dims: Vec::new(),
            process_noise: None,
            f,
        }
    }

    pub fn with_angle_dims(mut self, dims: Vec<usize>) -> Self {
        self.angle_dims = dims;
        self
    }

    pub fn with_process_noise(mut self, noise: Option<Vec<f64>>) -> Self {
        self.process_noise = noise;
        self
    }
}

impl<F> Dynamics for KnownDynamics<F>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync,
{
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn step(&self, state: &[f64], action: &AugmentedAction, rng: &mut Rng) -> Result<Vec<f64>> {
        let mut next = (self.f)(state, &action.u);
        if next.len() != self.state_dim {
            return Err(Error::DimensionMismatch {
                context: "known dynamics output",
                expected: self.state_dim,
                got: next.len(),
            });
        }
        add_process_noise(&mut next, self.process_noise.as_deref(), rng);
        wrap_dims(&mut next, &self.angle_dims);
        Ok(next)
    }
}

/// Hallucinated input that makes the mean-plus-band transition hit
/// `target_delta` exactly: `eta_i = (t_i - mean_i) / (beta * std_i)`, with
/// `0 / 0` read as 0.
pub fn recover_eta(post: &GpPosterior, beta: f64, s: &[f64], u: &[f64], target_delta: &[f64]) -> Result<Vec<f64>> {
    let pred = post.predict(s, u)?;
    if target_delta.len() != pred.mean.len() {
        return Err(Error::DimensionMismatch {
            context: "target delta",
            expected: pred.mean.len(),
            got: target_delta.len(),
        });
    }
    let mut eta = Vec::with_capacity(target_delta.len());
    let mut worst: Option<(usize, f64)> = None;
    for (i, t) in target_delta.iter().enumerate() {
        let num = t - pred.mean[i];
        let den = beta * pred.std[i];
        let e = if num == 0.0 { 0.0 } else { num / den };
        if !(e.abs() <= 1.0) {
            let ratio = e.abs();
            if worst.is_none_or(|(_, r)| ratio > r) {
                worst = Some((i, ratio));
            }
        }
        eta.push(e);
    }
    if let Some((dim, ratio)) = worst {
        return Err(Error::OutOfBand { dim, ratio });
    }
    Ok(eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp_model::{sample_rff, GpDataset, KernelParams};
    use crate::rng::seeded;

    fn posterior() -> Arc<GpPosterior> {
        let mut ds = GpDataset::new(2, 1);
        for i in 0..15 {
            let x = i as f64 * 0.2 - 1.5;
            ds.push(&[x, 0.5 * x], &[x.sin()], &[0.1 * x, -0.05 * x * x]).unwrap();
        }
        let k = KernelParams::new(vec![0.8, 0.8, 1.0], 0.5, 1e-4).unwrap();
        Arc::new(GpPosterior::fit(ds, k).unwrap())
    }

    #[test]
    fn greedy_without_std_is_mean_dynamics() {
        let post = posterior();
        let a = DynamicsAdapter::new(Strategy::Greedy { sample_epistemic: false }, post.clone(), None).unwrap();
        let s = [0.2, -0.3];
        let next = a.step_greedy(&s, &[0.1], &mut seeded(0)).unwrap();
        let pred = post.predict(&s, &[0.1]).unwrap();
        assert_eq!(next, vec![s[0] + pred.mean[0], s[1] + pred.mean[1]]);
    }

    #[test]
    fn greedy_is_seeded() {
        let a = DynamicsAdapter::new(Strategy::Greedy { sample_epistemic: true }, posterior(), Some(vec![0.01, 0.01])).unwrap();
        let x = a.step_greedy(&[3.0, 1.0], &[0.0], &mut seeded(4)).unwrap();
        let y = a.step_greedy(&[3.0, 1.0], &[0.0], &mut seeded(4)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn hallucinated_band_edges() {
        let post = posterior();
        let beta = 2.0;
        let a = DynamicsAdapter::new(Strategy::HUcrl { beta }, post.clone(), None).unwrap();
        let s = [1.0, 4.0];
        let pred = post.predict(&s, &[0.5]).unwrap();
        let mid = a.step_hallucinated(&s, &AugmentedAction::new(vec![0.5], vec![0.0, 0.0]), &mut seeded(0)).unwrap();
        let top = a.step_hallucinated(&s, &AugmentedAction::new(vec![0.5], vec![1.0, 1.0]), &mut seeded(0)).unwrap();
        for i in 0..2 {
            assert_eq!(mid[i], s[i] + pred.mean[i]);
            assert!((top[i] - (s[i] + pred.mean[i] + beta * pred.std[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_beta_ignores_eta() {
        let post = posterior();
        let a = DynamicsAdapter::new(Strategy::HUcrl { beta: 0.0 }, post.clone(), None).unwrap();
        let s = [0.3, 0.3];
        let x = a.step_hallucinated(&s, &AugmentedAction::new(vec![0.0], vec![0.7, -1.0]), &mut seeded(0)).unwrap();
        let pred = post.predict(&s, &[0.0]).unwrap();
        assert_eq!(x, vec![s[0] + pred.mean[0], s[1] + pred.mean[1]]);
    }

    #[test]
    fn eta_bounds_enforced() {
        let a = DynamicsAdapter::new(Strategy::HUcrl { beta: 1.0 }, posterior(), None).unwrap();
        let err = a
            .step_hallucinated(&[0.0, 0.0], &AugmentedAction::new(vec![0.0], vec![0.0, 1.5]), &mut seeded(0))
            .unwrap_err();
        assert!(matches!(err, Error::EtaOutOfBounds { dim: 1, .. }));
    }

    #[test]
    fn wrong_strategy_is_reported() {
        let a = DynamicsAdapter::new(Strategy::HUcrl { beta: 1.0 }, posterior(), None).unwrap();
        assert!(matches!(a.step_greedy(&[0.0, 0.0], &[0.0], &mut seeded(0)), Err(Error::StrategyMismatch { .. })));
    }

    #[test]
    fn thompson_is_frozen_within_an_episode() {
        let post = posterior();
        let sample = Arc::new(sample_rff(&post, 64, 5).unwrap());
        let a = DynamicsAdapter::new(Strategy::Thompson(sample), post.clone(), None).unwrap();
        let x = a.step_thompson(&[0.1, 0.2], &[0.3], &mut seeded(1)).unwrap();
        let y = a.step_thompson(&[0.1, 0.2], &[0.3], &mut seeded(2)).unwrap();
        assert_eq!(x, y);
        let other = Arc::new(sample_rff(&post, 64, 6).unwrap());
        let b = DynamicsAdapter::new(Strategy::Thompson(other), post, None).unwrap();
        assert_ne!(x, b.step_thompson(&[0.1, 0.2], &[0.3], &mut seeded(1)).unwrap());
    }

    #[test]
    fn recover_eta_edges() {
        let post = posterior();
        let s = [0.0, 0.1];
        let u = [0.2];
        let pred = post.predict(&s, &u).unwrap();
        assert_eq!(recover_eta(&post, 1.5, &s, &u, &pred.mean).unwrap(), vec![0.0, 0.0]);
        let edge: Vec<f64> = pred.mean.iter().zip(&pred.std).map(|(m, sd)| m + 1.5 * sd).collect();
        for e in recover_eta(&post, 1.5, &s, &u, &edge).unwrap() {
            assert!((e - 1.0).abs() < 1e-12);
        }
        let outside = vec![pred.mean[0], pred.mean[1] - 3.0 * pred.std[1]];
        assert!(matches!(
            recover_eta(&post, 1.5, &s, &u, &outside),
            Err(Error::OutOfBand { dim: 1, .. })
        ));
    }

    #[test]
    fn batch_step_matches_single_steps() {
        let post = posterior();
        let noise = Some(vec![0.01, 0.02]);
        let sample = Arc::new(sample_rff(&post, 32, 1).unwrap());
        for strategy in [
            Strategy::Greedy { sample_epistemic: true },
            Strategy::Thompson(sample),
            Strategy::HUcrl { beta: 1.3 },
        ] {
            let a = DynamicsAdapter::new(strategy, post.clone(), noise.clone()).unwrap();
            let h = a.eta_dim();
            let mut states = vec![0.1, 0.2, -0.5, 1.0, 2.0, -2.0];
            let u = vec![0.3, -0.1, 0.9];
            let eta: Vec<f64> = (0..3 * h).map(|i| (i as f64 * 0.37).sin()).collect();
            let mut rngs: Vec<Rng> = (0..3).map(seeded).collect();
            let single: Vec<Vec<f64>> = (0..3)
                .map(|i| {
                    let act = AugmentedAction::new(vec![u[i]], eta[i * h..(i + 1) * h].to_vec());
                    a.step(&states[2 * i..2 * i + 2], &act, &mut seeded(i as u64)).unwrap()
                })
                .collect();
            a.step_batch(&mut states, &u, &eta, &mut rngs).unwrap();
            for i in 0..3 {
                for o in 0..2 {
                    assert!((states[2 * i + o] - single[i][o]).abs() < 1e-9);
                }
            }
        }
    }
}
