//! Cross-entropy-method shooting over augmented action sequences, run in
//! receding horizon.
//!
//! A sequence has `horizon` rows of `action_dim + eta_dim` entries; the
//! trailing hallucinated entries are bounded by `[-1, 1]` and cost nothing.
//! Candidate `i` of iteration `k` draws its true actions, hallucinated
//! inputs and rollout noise from three separate streams keyed by `(k, i)`,
//! so the true-action samples do not depend on whether hallucination is on.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::env::{Environment, Trajectory};
use crate::error::{Error, Result};
use crate::hallucination::{AugmentedAction, Dynamics};
use crate::rng::{derive, Rng, Stream};

/// Per-step reward `r(s, u)`; hallucinated inputs never enter it.
pub trait Reward: Send + Sync {
    fn reward(&self, state: &[f64], u: &[f64]) -> f64;
}

impl<F> Reward for F
where
    F: Fn(&[f64], &[f64]) -> f64 + Send + Sync,
{
    fn reward(&self, state: &[f64], u: &[f64]) -> f64 {
        self(state, u)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CemConfig {
    pub horizon: usize,
    pub n_particles: usize,
    pub n_iters: usize,
    pub n_elites: usize,
    /// Initial proposal std per true-action dimension.
    pub init_std: Vec<f64>,
    /// Initial proposal std of every hallucinated dimension.
    pub eta_init_std: f64,
    /// Weight of the previous proposal in the update.
    pub alpha: f64,
    /// Std floor as a fraction of each dimension's range.
    pub std_floor: f64,
    pub action_bounds: Vec<(f64, f64)>,
    pub discount: f64,
    /// Re-inject the best sequence so far into every iteration.
    pub elitism: bool,
    /// Reset the shifted warm-start stds to their initial values.
    pub reset_std_on_shift: bool,
    /// Stochastic rollouts averaged per candidate sequence.
    pub particles_per_sequence: usize,
    /// Give every candidate of an iteration the same rollout noise streams.
    pub common_random_numbers: bool,
    /// AR(1) coefficient of the sampling noise along the horizon. Marginals
    /// stay standard normal; 0 gives independent steps.
    pub noise_correlation: f64,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self {
            horizon: 40,
            n_particles: 400,
            n_iters: 5,
            n_elites: 40,
            init_std: vec![0.5],
            eta_init_std: 0.5,
            alpha: 0.1,
            std_floor: 0.01,
            action_bounds: vec![(-1.0, 1.0)],
            discount: 1.0,
            elitism: true,
            reset_std_on_shift: false,
            particles_per_sequence: 1,
            common_random_numbers: false,
            noise_correlation: 0.0,
        }
    }
}

impl CemConfig {
    pub fn action_dim(&self) -> usize {
        self.action_bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("planner: {m}")));
        if self.horizon == 0 {
            return bad("horizon must be >= 1");
        }
        if self.n_particles == 0 || self.n_iters == 0 || self.particles_per_sequence == 0 {
            return bad("n_particles, n_iters and particles_per_sequence must be >= 1");
        }
        if self.n_elites == 0 || self.n_elites > self.n_particles {
            return bad("n_elites must be in 1..=n_particles");
        }
        if self.init_std.len() != self.action_bounds.len() {
            return bad("init_std needs one entry per action dimension");
        }
        if !(0.0..1.0).contains(&self.noise_correlation) {
            return bad("noise_correlation must lie in [0, 1)");
        }
        if self.init_std.iter().chain([&self.eta_init_std]).any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad("initial stds must be positive");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must be in [0, 1]");
        }
        if !(self.std_floor > 0.0 && self.std_floor.is_finite()) {
            return bad("std_floor must be positive");
        }
        if self.action_bounds.iter().any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return bad("action bounds need lo < hi");
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return bad("discount must be in (0, 1]");
        }
        Ok(())
    }

    fn bounds(&self, eta_dim: usize) -> Vec<(f64, f64)> {
        let mut b = self.action_bounds.clone();
        b.extend(std::iter::repeat_n((-1.0, 1.0), eta_dim));
        b
    }

    /// Proposal at the start of planning without a warm start: centred in
    /// the bounds (zero for the hallucinated inputs) at the initial std.
    pub fn initial_distribution(&self, eta_dim: usize) -> ActionSeqDistribution {
        let dim = self.action_dim() + eta_dim;
        let mut d = ActionSeqDistribution {
            horizon: self.horizon,
            dim,
            means: vec![0.0; self.horizon * dim],
            stds: vec![0.0; self.horizon * dim],
        };
        for t in 0..self.horizon {
            self.reinit_row(&mut d, t, true);
        }
        d
    }

    fn reinit_row(&self, d: &mut ActionSeqDistribution, t: usize, means: bool) {
        let q = self.action_dim();
        for j in 0..d.dim {
            let k = t * d.dim + j;
            if j < q {
                if means {
                    d.means[k] = 0.5 * (self.action_bounds[j].0 + self.action_bounds[j].1);
                }
                d.stds[k] = self.init_std[j];
            } else {
                if means {
                    d.means[k] = 0.0;
                }
                d.stds[k] = self.eta_init_std;
            }
        }
    }
}

/// Independent Gaussian proposal over an action sequence, row-major
/// `horizon x dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSeqDistribution {
    pub horizon: usize,
    pub dim: usize,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl ActionSeqDistribution {
    pub fn mean_row(&self, t: usize) -> &[f64] {
        &self.means[t * self.dim..(t + 1) * self.dim]
    }

    /// Drops the first step and appends a freshly initialized last step.
    pub fn shifted(&self, config: &CemConfig) -> Self {
        let mut d = self.clone();
        let w = self.dim;
        d.means.copy_within(w.., 0);
        d.stds.copy_within(w.., 0);
        let last = self.horizon - 1;
        config.reinit_row(&mut d, last, true);
        if config.reset_std_on_shift {
            for t in 0..last {
                config.reinit_row(&mut d, t, false);
            }
        }
        d
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    /// First step of the best sequence found.
    pub action: AugmentedAction,
    pub predicted_return: f64,
    /// Best sequence, row-major `horizon x dim`.
    pub best_sequence: Vec<f64>,
    pub final_distribution: ActionSeqDistribution,
    /// Best return after each iteration.
    pub trace: Vec<f64>,
}

impl PlanResult {
    pub fn best_step(&self, t: usize, action_dim: usize) -> AugmentedAction {
        let d = self.final_distribution.dim;
        let row = &self.best_sequence[t * d..(t + 1) * d];
        AugmentedAction::new(row[..action_dim].to_vec(), row[action_dim..].to_vec())
    }
}

/// Writes `iteration,best_return`.
pub fn write_trace_csv<W: Write>(trace: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "best_return"])?;
    for (i, r) in trace.iter().enumerate() {
        w.write_record([i.to_string(), r.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Discounted return of one augmented sequence from `s0`, with no terminal
/// value.
pub fn rollout<D, R>(dynamics: &D, reward: &R, s0: &[f64], seq: &[AugmentedAction], discount: f64, rng: &mut Rng) -> Result<f64>
where
    D: Dynamics + ?Sized,
    R: Reward + ?Sized,
{
    let mut s = s0.to_vec();
    let mut total = 0.0;
    let mut weight = 1.0;
    for (t, a) in seq.iter().enumerate() {
        let r = reward.reward(&s, &a.u);
        if !r.is_finite() {
            return Err(Error::DivergedRollout { step: t });
        }
        total += weight * r;
        weight *= discount;
        s = dynamics.step(&s, a, rng)?;
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::DivergedRollout { step: t });
        }
    }
    Ok(total)
}

/// Returns of `count` sequences evaluated in lockstep; diverged candidates
/// get `NEG_INFINITY`.
#[allow(clippy::too_many_arguments)]
fn evaluate_batch<D, R>(
    dynamics: &D,
    reward: &R,
    s0: &[f64],
    seqs: &[f64],
    count: usize,
    horizon: usize,
    discount: f64,
    rngs: &mut [Rng],
) -> Result<Vec<f64>>
where
    D: Dynamics + ?Sized,
    R: Reward + ?Sized,
{
    let p = dynamics.state_dim();
    let q = dynamics.action_dim();
    let h = dynamics.eta_dim();
    let dim = q + h;
    let mut states: Vec<f64> = s0.iter().copied().cycle().take(count * p).collect();
    let mut u = vec![0.0; count * q];
    let mut eta = vec![0.0; count * h];
    let mut returns = vec![0.0; count];
    let mut weight = 1.0;
    for t in 0..horizon {
        for i in 0..count {
            let row = &seqs[(i * horizon + t) * dim..(i * horizon + t + 1) * dim];
            u[i * q..(i + 1) * q].copy_from_slice(&row[..q]);
            eta[i * h..(i + 1) * h].copy_from_slice(&row[q..]);
            returns[i] += weight * reward.reward(&states[i * p..(i + 1) * p], &u[i * q..(i + 1) * q]);
        }
        weight *= discount;
        if t + 1 < horizon {
            dynamics.step_batch(&mut states, &u, &eta, rngs)?;
            // Keep diverged particles finite so they cannot poison batched
            // linear algebra; their return is already marked.
            for i in 0..count {
                let row = &mut states[i * p..(i + 1) * p];
                if row.iter().any(|x| !x.is_finite()) {
                    returns[i] = f64::NAN;
                    row.copy_from_slice(s0);
                }
            }
        }
    }
    Ok(returns
        .into_iter()
        .map(|r| if r.is_finite() { r } else { f64::NEG_INFINITY })
        .collect())
}

/// Mean return of each candidate over its rollout particles.
fn evaluate_candidates<D, R>(
    dynamics: &D,
    reward: &R,
    s0: &[f64],
    seqs: &[f64],
    config: &CemConfig,
    iter: u64,
    base: u64,
) -> Result<Vec<f64>>
where
    D: Dynamics + ?Sized,
    R: Reward + ?Sized,
{
    let n = config.n_particles;
    let k = config.particles_per_sequence;
    let stream = |i: usize, j: usize| {
        let cand = if config.common_random_numbers { 0 } else { i as u64 };
        derive(base, Stream::Rollout, &[iter, cand, j as u64])
    };
    let mut rngs: Vec<Rng> = (0..n).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| stream(i, j)).collect();
    if k == 1 {
        return evaluate_batch(dynamics, reward, s0, seqs, n, config.horizon, config.discount, &mut rngs);
    }
    let len = seqs.len() / n;
    let expanded: Vec<f64> = seqs.chunks_exact(len).flat_map(|c| (0..k).flat_map(move |_| c.iter().copied())).collect();
    let all = evaluate_batch(dynamics, reward, s0, &expanded, n * k, config.horizon, config.discount, &mut rngs)?;
    Ok(all.chunks_exact(k).map(|c| c.iter().sum::<f64>() / k as f64).collect())
}

/// Cross-entropy-method planning from `s0`.
pub fn plan_cem<D, R>(
    dynamics: &D,
    reward: &R,
    s0: &[f64],
    config: &CemConfig,
    init: Option<&ActionSeqDistribution>,
    rng: &mut Rng,
) -> Result<PlanResult>
where
    D: Dynamics + ?Sized,
    R: Reward + ?Sized,
{
    config.validate()?;
    let q = dynamics.action_dim();
    let h = dynamics.eta_dim();
    if q != config.action_dim() {
        return Err(Error::DimensionMismatch {
            context: "planner action bounds",
            expected: q,
            got: config.action_dim(),
        });
    }
    if s0.len() != dynamics.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "planner start state",
            expected: dynamics.state_dim(),
            got: s0.len(),
        });
    }
    let dim = q + h;
    let horizon = config.horizon;
    let mut dist = match init {
        Some(d) if d.horizon == horizon && d.dim == dim => d.clone(),
        Some(d) => {
            return Err(Error::DimensionMismatch {
                context: "warm-start distribution",
                expected: horizon * dim,
                got: d.horizon * d.dim,
            })
        }
        None => config.initial_distribution(h),
    };
    let bounds = config.bounds(h);
    let floors: Vec<f64> = bounds.iter().map(|(lo, hi)| config.std_floor * (hi - lo)).collect();
    let base: u64 = rng.random();
    let n = config.n_particles;
    let len = horizon * dim;
    let mut seqs = vec![0.0; n * len];
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut trace = Vec::with_capacity(config.n_iters);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let phi = config.noise_correlation;
    let innovation = (1.0 - phi * phi).sqrt();
    let mut z = vec![0.0; dim];

    for iter in 0..config.n_iters {
        let k = iter as u64;
        for i in 0..n {
            let mut u_rng = derive(base, Stream::ActionSample, &[k, i as u64]);
            let mut eta_rng = derive(base, Stream::EtaSample, &[k, i as u64]);
            let seq = &mut seqs[i * len..(i + 1) * len];
            for t in 0..horizon {
                for j in 0..dim {
                    let idx = t * dim + j;
                    let e: f64 = if j < q {
                        u_rng.sample(StandardNormal)
                    } else {
                        eta_rng.sample(StandardNormal)
                    };
                    z[j] = if t == 0 || phi == 0.0 { e } else { phi * z[j] + innovation * e };
                    let (lo, hi) = bounds[j];
                    seq[idx] = (dist.means[idx] + dist.stds[idx] * z[j]).clamp(lo, hi);
                }
            }
        }
        let reinjected = match (&best, config.elitism) {
            (Some((seq, _)), true) => {
                seqs[..len].copy_from_slice(seq);
                true
            }
            _ => false,
        };
        let mut returns = evaluate_candidates(dynamics, reward, s0, &seqs, config, k, base)?;
        if reinjected {
            returns[0] = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1);
        }

        order.clear();
        order.extend((0..n).filter(|&i| returns[i] > f64::NEG_INFINITY));
        if order.is_empty() {
            if best.is_none() {
                return Err(Error::PlanningFailed);
            }
            trace.push(best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1));
            continue;
        }
        // Stable: equal returns keep candidate order.
        order.sort_by(|&a, &b| returns[b].total_cmp(&returns[a]));
        let top = order[0];
        if best.as_ref().is_none_or(|b| returns[top] > b.1) {
            best = Some((seqs[top * len..(top + 1) * len].to_vec(), returns[top]));
        }
        trace.push(best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1));

        let elites = &order[..config.n_elites.min(order.len())];
        let m = elites.len() as f64;
        for idx in 0..len {
            let mean = elites.iter().map(|&e| seqs[e * len + idx]).sum::<f64>() / m;
            let var = elites.iter().map(|&e| (seqs[e * len + idx] - mean).powi(2)).sum::<f64>() / m;
            let a = config.alpha;
            dist.means[idx] = a * dist.means[idx] + (1.0 - a) * mean;
            dist.stds[idx] = (a * dist.stds[idx] + (1.0 - a) * var.sqrt()).max(floors[idx % dim]);
        }
    }

    let (best_sequence, predicted_return) = best.ok_or(Error::PlanningFailed)?;
    let action = AugmentedAction::new(best_sequence[..q].to_vec(), best_sequence[q..dim].to_vec());
    Ok(PlanResult {
        action,
        predicted_return,
        best_sequence,
        final_distribution: dist,
        trace,
    })
}

/// One receding-horizon episode on the real environment. Only the true
/// action of each plan is executed; the proposal is shifted one step and
/// reused as the next warm start.
pub fn mpc_episode<E, D, R>(
    env: &mut E,
    dynamics: &D,
    reward: &R,
    config: &CemConfig,
    warm_start: Option<ActionSeqDistribution>,
    rng: &mut Rng,
) -> Result<Trajectory>
where
    E: Environment + ?Sized,
    D: Dynamics + ?Sized,
    R: Reward + ?Sized,
{
    let steps = env.horizon();
    let mut traj = Trajectory {
        states: Vec::with_capacity(steps + 1),
        actions: Vec::with_capacity(steps),
        rewards: Vec::with_capacity(steps),
    };
    let mut state = env.reset();
    let mut proposal = warm_start;
    for _ in 0..steps {
        let plan = plan_cem(dynamics, reward, &state, config, proposal.as_ref(), rng)?;
        let u = plan.action.u;
        let r = env.reward(&state, &u);
        let next = env.step(&u)?;
        traj.states.push(std::mem::replace(&mut state, next));
        traj.actions.push(u);
        traj.rewards.push(r);
        proposal = Some(plan.final_distribution.shifted(config));
    }
    traj.states.push(state);
    Ok(traj)
}
