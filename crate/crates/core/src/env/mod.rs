//! Ground-truth simulators: the sparse-reward pendulum swing-up and a
//! one-dimensional bandit on which a pure-exploitation UCB rule gets stuck.

mod bandit;
mod pendulum;
mod tolerance;

pub use bandit::{gp_ucb_select, run_bandit, BanditProblem, BanditTrace, Bump};
pub use pendulum::{episode_reset, pendulum_reward, pendulum_step, Pendulum, PendulumParams, PendulumState};
pub use tolerance::{tolerance, ToleranceSpec};

use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// A single-owner episodic environment.
pub trait Environment {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Episode length in steps.
    fn horizon(&self) -> usize;
    /// Per-dimension `(lo, hi)` action bounds.
    fn action_bounds(&self) -> Vec<(f64, f64)>;
    /// State dimensions that are angles (wrapped, encoded as sin/cos).
    fn angle_dims(&self) -> Vec<usize> {
        Vec::new()
    }
    /// Column names for trajectory export.
    fn state_names(&self) -> Vec<String> {
        (0..self.state_dim()).map(|i| format!("s{i}")).collect()
    }

    fn reset(&mut self) -> Vec<f64>;
    fn reward(&self, state: &[f64], u: &[f64]) -> f64;
    /// Apply `u` (clipped to the bounds) and return the next state.
    fn step(&mut self, u: &[f64]) -> Result<Vec<f64>>;
}

/// Realized episode: `states` has one more row than `actions`/`rewards`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// Transitions `(s_t, u_t, s_{t+1})`.
    pub fn transitions(&self) -> impl Iterator<Item = (&[f64], &[f64], &[f64])> {
        self.actions
            .iter()
            .enumerate()
            .map(|(t, u)| (self.states[t].as_slice(), u.as_slice(), self.states[t + 1].as_slice()))
    }

    /// Writes `t, <state columns>, <action columns>, r`, one row per step.
    pub fn write_csv<W: Write>(&self, out: W, state_names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let q = self.actions.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend(state_names.iter().cloned());
        if q == 1 {
            header.push("u".into());
        } else {
            header.extend((0..q).map(|i| format!("u{i}")));
        }
        header.push("r".into());
        w.write_record(&header)?;
        for t in 0..self.len() {
            let mut row = vec![t.to_string()];
            row.extend(self.states[t].iter().map(f64::to_string));
            row.extend(self.actions[t].iter().map(f64::to_string));
            row.push(self.rewards[t].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, state_names: &[String]) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?, state_names)
    }
}
