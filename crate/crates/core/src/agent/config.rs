use serde::{Deserialize, Serialize};

use crate::env::PendulumParams;
use crate::error::{Error, Result};
use crate::gp_model::{BetaSchedule, KernelParams};
use crate::hallucination::StrategyTag;
use crate::planner::CemConfig;

/// Everything that determines a run. Only `episodes` is required; every
/// other field has a default that is written back into the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub episodes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub strategy: StrategyConfig,
    #[serde(default = "pendulum_planner")]
    pub planner: CemConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub solve: SolveCriterion,
    /// End the run after the first solving episode.
    #[serde(default)]
    pub stop_on_solve: bool,
    /// Regret baseline settings; `None` skips the (expensive) baseline.
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
}

impl RunConfig {
    pub fn new(episodes: usize) -> Self {
        Self {
            episodes,
            seed: 0,
            env: EnvConfig::default(),
            strategy: StrategyConfig::default(),
            planner: pendulum_planner(),
            model: ModelConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
            solve: SolveCriterion::default(),
            stop_on_solve: false,
            oracle: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::InvalidConfig("episodes must be >= 1".into()));
        }
        self.env.params.validate()?;
        if !(self.env.rho >= 0.0 && self.env.rho.is_finite()) {
            return Err(Error::InvalidConfig("env.rho must be finite and >= 0".into()));
        }
        self.planner.validate()?;
        if self.planner.action_dim() != 1 {
            return Err(Error::InvalidConfig("planner.action_bounds must have one entry for the pendulum".into()));
        }
        self.model.kernel.validate()?;
        if !self.model.kernel.output_scales.is_empty() && self.model.kernel.output_scales.len() != 2 {
            return Err(Error::InvalidConfig("model.kernel.output_scales needs 2 entries (theta, omega)".into()));
        }
        if self.model.kernel.input_dim() != 4 {
            return Err(Error::InvalidConfig(
                "model.kernel needs 4 lengthscales (sin theta, cos theta, omega, u)".into(),
            ));
        }
        self.model.beta.validate()?;
        if self.model.max_points == 0 {
            return Err(Error::InvalidConfig("model.max_points must be >= 1".into()));
        }
        if self.strategy.kind == StrategyTag::Thompson && self.strategy.rff_features == 0 {
            return Err(Error::InvalidConfig("strategy.rff_features must be >= 1".into()));
        }
        if let Some(b) = self.diagnostics.coverage_beta {
            if !(b >= 0.0) {
                return Err(Error::InvalidConfig("diagnostics.coverage_beta must be >= 0".into()));
            }
        }
        if !(self.diagnostics.delta > 0.0 && self.diagnostics.delta < 1.0) {
            return Err(Error::InvalidConfig("diagnostics.delta must lie in (0, 1)".into()));
        }
        if self.solve.consecutive == 0 || !(self.solve.angle_threshold > 0.0) {
            return Err(Error::InvalidConfig("solve criterion needs a positive threshold and run length".into()));
        }
        if let Some(o) = &self.oracle {
            if o.seeds == 0 || o.particle_factor == 0 || o.iter_factor == 0 {
                return Err(Error::InvalidConfig("oracle seeds and budget factors must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Planner defaults sized for the pendulum on one core.
pub fn pendulum_planner() -> CemConfig {
    CemConfig {
        horizon: 30,
        n_particles: 100,
        n_iters: 3,
        n_elites: 10,
        // Candidates share noise draws, so rankings compare actions rather than luck.
        common_random_numbers: true,
        // A torque penalty otherwise collapses the proposal onto u = 0 and
        // the warm start never explores again. Smooth, wide samples can pump.
        init_std: vec![1.0],
        reset_std_on_shift: true,
        noise_correlation: 0.9,
        ..CemConfig::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub params: PendulumParams,
    /// Action-penalty weight.
    pub rho: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            params: PendulumParams::default(),
            rho: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyConfig {
    pub kind: StrategyTag,
    /// Greedy only: sample the epistemic std instead of using the mean.
    pub greedy_sampling: bool,
    /// Thompson only: random features per sampled function.
    pub rff_features: usize,
    /// Add the environment's transition noise during planning rollouts.
    pub planning_noise: bool,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: StrategyTag::Hucrl,
            greedy_sampling: true,
            rff_features: 256,
            planning_noise: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Over the encoded input `(sin theta, cos theta, omega, u)`.
    pub kernel: KernelParams,
    pub beta: BetaSchedule,
    /// Training-set cap; larger datasets are subsampled by posterior variance.
    pub max_points: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kernel: KernelParams {
                lengthscales: vec![0.8, 0.8, 3.0, 1.0],
                signal_variance: 1.0,
                noise_variance: 1e-4,
                output_scales: vec![0.2, 1.0],
            },
            beta: BetaSchedule::default(),
            max_points: 150,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    /// Band width for per-episode coverage; `None` uses the run's beta.
    pub coverage_beta: Option<f64>,
    /// Flag episodes whose states leave this ball around the start state.
    pub state_norm_bound: Option<f64>,
    pub delta: f64,
    /// Lipschitz constant of the closed loop, for the reported radius only.
    pub lipschitz: Option<f64>,
    /// Bound on `||f(s0) - s0||`, for the reported radius only.
    pub initial_step_bound: Option<f64>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            coverage_beta: None,
            state_norm_bound: None,
            delta: 0.1,
            lipschitz: None,
            initial_step_bound: None,
        }
    }
}

/// An episode is solved when `|theta| < angle_threshold` holds for at
/// least `consecutive` consecutive states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveCriterion {
    pub angle_threshold: f64,
    pub consecutive: usize,
}

impl Default for SolveCriterion {
    fn default() -> Self {
        Self {
            angle_threshold: 0.5,
            consecutive: 50,
        }
    }
}

impl SolveCriterion {
    /// Longest run of states with `|theta| < angle_threshold`.
    pub fn longest_upright(&self, states: &[Vec<f64>]) -> usize {
        let mut best = 0;
        let mut cur = 0;
        for s in states {
            if s[0].abs() < self.angle_threshold {
                cur += 1;
                best = best.max(cur);
            } else {
                cur = 0;
            }
        }
        best
    }

    pub fn is_solved(&self, states: &[Vec<f64>]) -> bool {
        self.longest_upright(states) >= self.consecutive
    }
}

/// High-budget planning on the true dynamics, used as the stand-in for the
/// optimal return.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub seeds: usize,
    pub particle_factor: usize,
    pub iter_factor: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            seeds: 5,
            particle_factor: 4,
            iter_factor: 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"episodes": 3}"#).unwrap();
        assert_eq!(c, RunConfig::new(3));
        c.validate().unwrap();
    }

    #[test]
    fn unknown_and_missing_fields_rejected() {
        let e = serde_json::from_str::<RunConfig>(r#"{"episodes": 3, "episods": 4}"#).unwrap_err();
        assert!(e.to_string().contains("episods"));
        let e = serde_json::from_str::<RunConfig>(r#"{"seed": 1}"#).unwrap_err();
        assert!(e.to_string().contains("episodes"));
        let e = serde_json::from_str::<RunConfig>(r#"{"episodes": 1, "model": {"max_pts": 3}}"#).unwrap_err();
        assert!(e.to_string().contains("max_pts"));
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::new(7);
        c.strategy.kind = StrategyTag::Thompson;
        c.model.beta = BetaSchedule::Rkhs { bound: 1.0, delta: 0.05 };
        c.oracle = Some(OracleConfig::default());
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&s).unwrap(), c);
    }

    #[test]
    fn zero_episodes_rejected() {
        assert!(RunConfig::new(0).validate().is_err());
    }

    #[test]
    fn solve_run_length() {
        let c = SolveCriterion {
            angle_threshold: 0.5,
            consecutive: 3,
        };
        let s = |t: f64| vec![t, 0.0];
        let states = vec![s(3.0), s(0.1), s(0.2), s(0.6), s(0.1), s(-0.4), s(0.49), s(3.0)];
        assert_eq!(c.longest_upright(&states), 3);
        assert!(c.is_solved(&states));
        assert!(!c.is_solved(&states[..6]));
    }
}
