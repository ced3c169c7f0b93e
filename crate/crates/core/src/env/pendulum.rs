use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::tolerance::{tolerance, ToleranceSpec};
use super::Environment;
use crate::angle::wrap_angle;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PendulumParams {
    pub mass: f64,
    pub length: f64,
    pub gravity: f64,
    pub friction: f64,
    pub dt: f64,
    /// Integrator substeps per control step.
    pub substeps: usize,
    pub max_torque: f64,
    /// Transition noise std on `(theta, omega)`.
    pub noise_std: [f64; 2],
    pub horizon: usize,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            mass: 0.3,
            length: 0.5,
            gravity: 9.81,
            friction: 0.005,
            dt: 0.05,
            substeps: 2,
            max_torque: 1.0,
            noise_std: [0.001, 0.01],
            horizon: 400,
        }
    }
}

impl PendulumParams {
    pub fn noiseless(mut self) -> Self {
        self.noise_std = [0.0, 0.0];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("length", self.length),
            ("gravity", self.gravity),
            ("dt", self.dt),
            ("max_torque", self.max_torque),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("pendulum: {name} must be positive")));
            }
        }
        if !(self.friction >= 0.0) {
            return Err(Error::InvalidConfig("pendulum: friction must be >= 0".into()));
        }
        if self.noise_std.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidConfig("pendulum: noise_std must be >= 0".into()));
        }
        if self.horizon == 0 || self.substeps == 0 {
            return Err(Error::InvalidConfig("pendulum: horizon and substeps must be >= 1".into()));
        }
        Ok(())
    }

    fn inertia(&self) -> f64 {
        self.mass * self.length * self.length
    }

    /// `0.5 m l^2 omega^2 + m g l cos(theta)`; maximal when upright at rest.
    pub fn energy(&self, s: &PendulumState) -> f64 {
        0.5 * self.inertia() * s.omega * s.omega + self.mass * self.gravity * self.length * s.theta.cos()
    }
}

/// Angle measured from upright, wrapped to `(-pi, pi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendulumState {
    pub theta: f64,
    pub omega: f64,
}

impl PendulumState {
    pub fn from_slice(s: &[f64]) -> Self {
        Self {
            theta: s[0],
            omega: s[1],
        }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.theta, self.omega]
    }

    pub fn observation(&self) -> [f64; 3] {
        [self.theta.sin(), self.theta.cos(), self.omega]
    }
}

/// Hanging straight down, at rest.
pub fn episode_reset(_params: &PendulumParams) -> PendulumState {
    PendulumState { theta: PI, omega: 0.0 }
}

/// `r_theta * r_omega + rho * r_u`, with `r_u <= 0` penalizing torque.
pub fn pendulum_reward(state: &PendulumState, u: f64, rho: f64) -> f64 {
    const THETA: ToleranceSpec = tol(0.95, 1.0, 0.1);
    const OMEGA: ToleranceSpec = tol(-0.5, 0.5, 0.5);
    const ACTION: ToleranceSpec = tol(-0.1, 0.1, 0.1);
    let r_theta = tolerance(state.theta.cos(), &THETA);
    let r_omega = tolerance(state.omega, &OMEGA);
    let r_u = tolerance(u, &ACTION) - 1.0;
    r_theta * r_omega + rho * r_u
}

const fn tol(lower: f64, upper: f64, margin: f64) -> ToleranceSpec {
    ToleranceSpec {
        lower,
        upper,
        margin,
        value_at_margin: 0.1,
    }
}

/// Noise-free integration of
/// `theta'' = (g/l) sin(theta) - b/(m l^2) omega + u/(m l^2)` with the
/// Stormer-Verlet (leapfrog) scheme: a half kick, a drift and a half kick
/// per substep. Symplectic and second order, so energy drift stays bounded.
fn integrate(params: &PendulumParams, state: &PendulumState, u: f64) -> PendulumState {
    let u = u.clamp(-params.max_torque, params.max_torque);
    let h = params.dt / params.substeps as f64;
    let inertia = params.inertia();
    let g_l = params.gravity / params.length;
    let damp = params.friction / inertia;
    let drive = u / inertia;
    let acc = |theta: f64, omega: f64| g_l * theta.sin() - damp * omega + drive;
    let (mut theta, mut omega) = (state.theta, state.omega);
    for _ in 0..params.substeps {
        let half = omega + 0.5 * h * acc(theta, omega);
        theta += h * half;
        omega = half + 0.5 * h * acc(theta, half);
    }
    PendulumState { theta, omega }
}

/// One control step: clip the torque, integrate, add transition noise and
/// rewrap the angle.
pub fn pendulum_step(params: &PendulumParams, state: &PendulumState, u: f64, rng: &mut Rng) -> Result<PendulumState> {
    let mut next = integrate(params, state, u);
    for (x, sigma) in [&mut next.theta, &mut next.omega].into_iter().zip(params.noise_std) {
        if sigma > 0.0 {
            *x += sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    next.theta = wrap_angle(next.theta);
    if !(next.theta.is_finite() && next.omega.is_finite()) {
        return Err(Error::SimulatorFault);
    }
    Ok(next)
}

/// Deterministic part of the step (no noise), wrapped.
pub(crate) fn pendulum_mean_step(params: &PendulumParams, s: &[f64], u: &[f64]) -> Vec<f64> {
    let next = integrate(params, &PendulumState::from_slice(s), u[0]);
    vec![wrap_angle(next.theta), next.omega]
}

/// The swing-up task with action penalty `rho`.
#[derive(Clone, Debug)]
pub struct Pendulum {
    params: PendulumParams,
    rho: f64,
    state: PendulumState,
    rng: Rng,
}

impl Pendulum {
    pub fn new(params: PendulumParams, rho: f64, rng: Rng) -> Result<Self> {
        params.validate()?;
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::InvalidConfig("rho must be finite and >= 0".into()));
        }
        let state = episode_reset(&params);
        Ok(Self { params, rho, state, rng })
    }

    pub fn params(&self) -> &PendulumParams {
        &self.params
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn state(&self) -> PendulumState {
        self.state
    }

    /// Transition without noise, as a plain function of `(s, u)`.
    pub fn mean_dynamics(&self) -> impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static {
        let params = self.params.clone();
        move |s, u| pendulum_mean_step(&params, s, u)
    }

    /// Reward as a plain function of `(s, u)`.
    pub fn reward_fn(&self) -> impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static {
        let rho = self.rho;
        move |s, u| pendulum_reward(&PendulumState::from_slice(s), u[0], rho)
    }
}

impl Environment for Pendulum {
    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn action_bounds(&self) -> Vec<(f64, f64)> {
        vec![(-self.params.max_torque, self.params.max_torque)]
    }

    fn angle_dims(&self) -> Vec<usize> {
        vec![0]
    }

    fn state_names(&self) -> Vec<String> {
        vec!["theta".into(), "omega".into()]
    }

    fn reset(&mut self) -> Vec<f64> {
        self.state = episode_reset(&self.params);
        self.state.to_vec()
    }

    fn reward(&self, state: &[f64], u: &[f64]) -> f64 {
        pendulum_reward(&PendulumState::from_slice(state), u[0], self.rho)
    }

    fn step(&mut self, u: &[f64]) -> Result<Vec<f64>> {
        self.state = pendulum_step(&self.params, &self.state, u[0], &mut self.rng)?;
        Ok(self.state.to_vec())
    }
}
