use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

use super::config::{EnvConfig, OracleConfig};
use super::manifest::EpisodeRecord;
use crate::env::{Environment, Pendulum};
use crate::error::Result;
use crate::hallucination::KnownDynamics;
use crate::planner::{mpc_episode, CemConfig};
use crate::rng::{derive, Stream};

/// Index offset keeping oracle streams apart from learning episodes.
const ORACLE_STREAM: u64 = 1 << 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub mean: f64,
    pub returns: Vec<f64>,
}

/// Mean episode return of receding-horizon planning on the true dynamics
/// with an enlarged budget, over `oracle.seeds` seeded episodes.
pub fn oracle_return(
    env: &EnvConfig,
    planner: &CemConfig,
    oracle: &OracleConfig,
    planning_noise: bool,
    seed: u64,
) -> Result<OracleEstimate> {
    let budget = CemConfig {
        n_particles: planner.n_particles * oracle.particle_factor,
        n_elites: planner.n_elites * oracle.particle_factor,
        n_iters: planner.n_iters * oracle.iter_factor,
        ..planner.clone()
    };
    let mut returns = Vec::with_capacity(oracle.seeds);
    for k in 0..oracle.seeds as u64 {
        let mut pendulum = Pendulum::new(env.params.clone(), env.rho, derive(seed, Stream::Env, &[ORACLE_STREAM + k]))?;
        let noise = planning_noise.then(|| env.params.noise_std.to_vec());
        let dynamics = KnownDynamics::new(2, 1, pendulum.mean_dynamics())
            .with_angle_dims(pendulum.angle_dims())
            .with_process_noise(noise);
        let reward = pendulum.reward_fn();
        let mut rng = derive(seed, Stream::Plan, &[ORACLE_STREAM + k]);
        let traj = mpc_episode(&mut pendulum, &dynamics, &reward, &budget, None, &mut rng)?;
        returns.push(traj.total_reward());
    }
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    Ok(OracleEstimate { mean, returns })
}

/// Cumulative `sum_n max(0, oracle - return_n)`.
pub fn regret_curve(returns: &[f64], oracle: f64) -> Vec<f64> {
    returns
        .iter()
        .scan(0.0, |acc, r| {
            *acc += (oracle - r).max(0.0);
            Some(*acc)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseBoundReport {
    pub bound: f64,
    pub passed: Vec<bool>,
    pub exceedances: usize,
    /// `exceedances / episodes`, to compare against `delta`.
    pub frequency: f64,
    pub delta: f64,
    /// High-probability radius per episode for the supplied constants;
    /// reported, never enforced.
    pub theoretical_radius: Vec<f64>,
}

/// Checks each episode's largest distance from the start state against
/// `bound`.
///
/// With a closed-loop Lipschitz constant `L`, a first-step bound `B0`, noise
/// scale `sigma` in `p` dimensions and `N` steps per episode, the radius
/// reported for episode `n` is
/// `L^(N-1) N (B0 + sqrt(2 sigma p + 4 sigma / e * ln(N pi^2 n^2 / (3 delta))))`.
pub fn noise_bound_diagnostic(
    records: &[EpisodeRecord],
    bound: f64,
    delta: f64,
    radius_constants: Option<(f64, f64, f64, usize, usize)>,
) -> NoiseBoundReport {
    let passed: Vec<bool> = records.iter().map(|r| r.max_state_norm <= bound).collect();
    let exceedances = passed.iter().filter(|p| !**p).count();
    let frequency = if records.is_empty() {
        0.0
    } else {
        exceedances as f64 / records.len() as f64
    };
    let theoretical_radius = match radius_constants {
        Some((l, b0, sigma, p, steps)) => records
            .iter()
            .map(|r| {
                let n = r.index as f64;
                let nn = steps as f64;
                let log = (nn * PI * PI * n * n / (3.0 * delta)).ln();
                l.powi(steps as i32 - 1) * nn * (b0 + (2.0 * sigma * p as f64 + 4.0 * sigma / E * log).sqrt())
            })
            .collect(),
        None => Vec::new(),
    };
    NoiseBoundReport {
        bound,
        passed,
        exceedances,
        frequency,
        delta,
        theoretical_radius,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(index: usize, norm: f64) -> EpisodeRecord {
        EpisodeRecord {
            index,
            episode_return: 0.0,
            complexity_increment: 0.0,
            coverage: 1.0,
            coverage_beta: 1.0,
            beta: 1.0,
            max_state_norm: norm,
            longest_upright: 0,
            solved: false,
            retained_points: 0,
            total_points: 0,
            wall_ms: 0,
            states: Vec::new(),
            actions: Vec::new(),
        }
    }

    #[test]
    fn regret_examples() {
        assert_eq!(regret_curve(&[3.0, 3.0, 3.0], 3.0), vec![0.0, 0.0, 0.0]);
        assert_eq!(regret_curve(&[1.0], 3.0), vec![2.0]);
        assert_eq!(regret_curve(&[1.0, 5.0, 2.5], 3.0), vec![2.0, 2.0, 2.5]);
    }

    #[test]
    fn noise_bound_counts() {
        let recs = vec![record(1, 1.0), record(2, 3.0), record(3, 0.5), record(4, 2.0)];
        let r = noise_bound_diagnostic(&recs, 1.5, 0.1, None);
        assert_eq!(r.passed, vec![true, false, true, false]);
        assert_eq!(r.exceedances, 2);
        assert_eq!(r.frequency, 0.5);
        assert!(r.theoretical_radius.is_empty());
        let zero = noise_bound_diagnostic(&recs, 0.0, 0.1, None);
        assert_eq!(zero.exceedances, 4);
    }

    #[test]
    fn radius_grows_with_episodes() {
        let recs = vec![record(1, 0.0), record(2, 0.0), record(10, 0.0)];
        let r = noise_bound_diagnostic(&recs, 1.0, 0.1, Some((1.0, 0.5, 0.01, 2, 400)));
        assert!(r.theoretical_radius.windows(2).all(|w| w[1] > w[0]));
        let n = 400.0;
        let expect = n * (0.5 + (0.04 + 0.04 / E * (n * PI * PI / 0.3).ln()).sqrt());
        assert!((r.theoretical_radius[0] - expect).abs() < 1e-9);
    }
}
