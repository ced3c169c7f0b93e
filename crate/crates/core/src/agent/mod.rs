//! The episodic learn / plan / act loop.
//!
//! Episode `n` plans with the model fitted on episodes `1..n`, executes the
//! plan on the real pendulum, scores the new transitions against that same
//! pre-episode model (complexity, calibration) and only then refits.

mod config;
mod diagnostics;
mod manifest;
mod run;

pub use config::{
    pendulum_planner, DiagnosticsConfig, EnvConfig, ModelConfig, OracleConfig, RunConfig, SolveCriterion, StrategyConfig,
};
pub use diagnostics::{noise_bound_diagnostic, oracle_return, regret_curve, NoiseBoundReport, OracleEstimate};
pub use manifest::{config_hash, write_curve_csv, EpisodeRecord, OracleSummary, RunManifest, CURVE_HEADER, MANIFEST_FORMAT, MANIFEST_VERSION};
pub use run::{run, run_with, Agent};
