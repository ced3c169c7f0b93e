use std::sync::Arc;
use std::time::Instant;

use super::config::RunConfig;
use super::diagnostics::oracle_return;
use super::manifest::{EpisodeRecord, OracleSummary, RunManifest};
use crate::env::{Pendulum, Trajectory};
use crate::error::Result;
use crate::gp_model::{calibration_coverage, sample_rff, select_max_variance, GpDataset, GpPosterior};
use crate::hallucination::{DynamicsAdapter, Strategy, StrategyTag};
use crate::planner::mpc_episode;
use crate::rng::{derive, derive_seed, Stream};

/// Learning state carried across episodes.
#[derive(Clone, Debug)]
pub struct Agent {
    config: RunConfig,
    data: GpDataset,
    model: Arc<GpPosterior>,
    episode: usize,
}

impl Agent {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let data = GpDataset::new(2, 1).with_angle_dims(vec![0])?;
        let model = Arc::new(GpPosterior::fit(data.clone(), config.model.kernel.clone())?);
        Ok(Self {
            config,
            data,
            model,
            episode: 0,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    /// Every transition seen so far.
    pub fn data(&self) -> &GpDataset {
        &self.data
    }

    /// The snapshot the next episode will plan with.
    pub fn model(&self) -> &Arc<GpPosterior> {
        &self.model
    }

    pub fn episodes_done(&self) -> usize {
        self.episode
    }

    fn beta(&self) -> f64 {
        self.config.model.beta.beta(&self.model)
    }

    /// The strategy's dynamics for episode `n` (1-based) over the current
    /// snapshot. Thompson draws a fresh function per episode.
    pub fn adapter(&self, n: usize) -> Result<DynamicsAdapter> {
        let sc = &self.config.strategy;
        let strategy = match sc.kind {
            StrategyTag::Greedy => Strategy::Greedy {
                sample_epistemic: sc.greedy_sampling,
            },
            StrategyTag::Thompson => {
                let seed = derive_seed(self.config.seed, Stream::Thompson, &[n as u64]);
                Strategy::Thompson(Arc::new(sample_rff(&self.model, sc.rff_features, seed)?))
            }
            StrategyTag::Hucrl => Strategy::HUcrl { beta: self.beta() },
        };
        let noise = sc.planning_noise.then(|| self.config.env.params.noise_std.to_vec());
        DynamicsAdapter::new(strategy, self.model.clone(), noise)
    }

    /// Plan and act for one episode, score it against the pre-episode model,
    /// then refit.
    pub fn run_episode(&mut self) -> Result<(EpisodeRecord, Trajectory)> {
        let started = Instant::now();
        let n = self.episode + 1;
        let cfg = &self.config;
        let adapter = self.adapter(n)?;
        let mut env = Pendulum::new(cfg.env.params.clone(), cfg.env.rho, derive(cfg.seed, Stream::Env, &[n as u64]))?;
        let reward = env.reward_fn();
        let mut rng = derive(cfg.seed, Stream::Plan, &[n as u64]);
        let traj = mpc_episode(&mut env, &adapter, &reward, &cfg.planner, None, &mut rng)?;

        let mut fresh = self.data.empty_like();
        for (s, u, next) in traj.transitions() {
            fresh.push_transition(s, u, next)?;
        }
        let flat_states: Vec<f64> = fresh.states().concat();
        let flat_actions: Vec<f64> = fresh.actions().concat();
        let pred = self.model.predict_batch(&flat_states, &flat_actions, fresh.len(), true)?;
        let complexity_increment = pred.std.iter().map(|s| s * s).sum();
        let beta = self.beta();
        let coverage_beta = cfg.diagnostics.coverage_beta.unwrap_or(beta);
        let coverage = calibration_coverage(&self.model, &fresh, coverage_beta)?;
        let s0 = &traj.states[0];
        let max_state_norm = traj
            .states
            .iter()
            .map(|s| s.iter().zip(s0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let longest_upright = cfg.solve.longest_upright(&traj.states);

        self.data.extend_from(&fresh)?;
        let max_points = cfg.model.max_points;
        let train = if self.data.len() > max_points {
            self.data.subset(&select_max_variance(&self.data, &cfg.model.kernel, max_points))
        } else {
            self.data.clone()
        };
        let retained_points = train.len();
        self.model = Arc::new(GpPosterior::fit(train, cfg.model.kernel.clone())?);
        self.episode = n;

        let record = EpisodeRecord {
            index: n,
            episode_return: traj.total_reward(),
            complexity_increment,
            coverage,
            coverage_beta,
            beta,
            max_state_norm,
            longest_upright,
            solved: longest_upright >= self.config.solve.consecutive,
            retained_points,
            total_points: self.data.len(),
            wall_ms: started.elapsed().as_millis() as u64,
            states: traj.states.clone(),
            actions: traj.actions.clone(),
        };
        Ok((record, traj))
    }
}

/// Runs the configured episodes. Invalid configs are an error; failures
/// during the run return the manifest so far with `completed = false`.
pub fn run(config: &RunConfig) -> Result<RunManifest> {
    run_with(config, |_, _| {})
}

/// Like [`run`], calling `observer` after every episode.
pub fn run_with<F>(config: &RunConfig, mut observer: F) -> Result<RunManifest>
where
    F: FnMut(&EpisodeRecord, &Trajectory),
{
    let mut agent = Agent::new(config.clone())?;
    let mut manifest = RunManifest::new(config.clone());
    if let Some(oracle) = &config.oracle {
        match oracle_return(&config.env, &config.planner, oracle, config.strategy.planning_noise, config.seed) {
            Ok(est) => {
                manifest.oracle = Some(OracleSummary {
                    kind: "true-dynamics planner".into(),
                    mean_return: est.mean,
                    returns: est.returns,
                })
            }
            Err(e) => {
                manifest.error = Some(format!("oracle: {e}"));
                return Ok(manifest);
            }
        }
    }
    for _ in 0..config.episodes {
        match agent.run_episode() {
            Ok((record, traj)) => {
                observer(&record, &traj);
                manifest.cumulative_complexity += record.complexity_increment;
                let solved = record.solved;
                if solved && manifest.solved_episode.is_none() {
                    manifest.solved_episode = Some(record.index);
                }
                manifest.episodes.push(record);
                if solved && config.stop_on_solve {
                    break;
                }
            }
            Err(e) => {
                manifest.error = Some(format!("episode {}: {e}", agent.episodes_done() + 1));
                return Ok(manifest);
            }
        }
    }
    manifest.completed = true;
    Ok(manifest)
}
