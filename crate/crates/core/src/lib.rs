//! Optimistic model-based reinforcement learning over Gaussian-process
//! dynamics models.
//!
//! The crate is organised bottom-up:
//!
//! - [`gp_model`]: exact multi-output GP regression on `(state, action)`
//!   inputs, confidence scaling, information gain and random-feature
//!   posterior samples.
//! - [`hallucination`]: the one-step transition functions used by each
//!   exploration strategy (greedy, Thompson sampling and hallucinated
//!   optimism), behind the [`hallucination::Dynamics`] trait.
//! - [`planner`]: a cross-entropy-method shooting planner run in receding
//!   horizon against any [`hallucination::Dynamics`].
//! - [`env`]: the sparse-reward pendulum, the tolerance reward and the
//!   one-dimensional GP-UCB bandit.
//! - [`agent`]: the episodic learn/plan/act loop with its bookkeeping
//!   (returns, complexity, calibration, regret).

pub mod agent;
pub mod angle;
pub mod env;
pub mod error;
pub mod gp_model;
pub mod hallucination;
pub mod planner;
pub mod rng;

pub use error::{Error, Result};
