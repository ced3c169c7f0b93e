use serde::{Deserialize, Serialize};

use crate::angle::wrap_angle;
use crate::error::{Error, Result};

/// Transition data `(state, action) -> state delta`.
///
/// `angle_dims` lists state components that are angles: they enter the
/// kernel as `(sin, cos)` and their deltas are wrapped into `(-pi, pi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpDataset {
    state_dim: usize,
    action_dim: usize,
    #[serde(default)]
    angle_dims: Vec<usize>,
    states: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

impl GpDataset {
    pub fn new(state_dim: usize, action_dim: usize) -> Self {
        Self {
            state_dim,
            action_dim,
            angle_dims: Vec::new(),
            states: Vec::new(),
            actions: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn with_angle_dims(mut self, mut dims: Vec<usize>) -> Result<Self> {
        dims.sort_unstable();
        dims.dedup();
        if dims.iter().any(|&d| d >= self.state_dim) {
            return Err(Error::InvalidConfig(format!(
                "angle dimension out of range for state dimension {}",
                self.state_dim
            )));
        }
        self.angle_dims = dims;
        Ok(self)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn angle_dims(&self) -> &[usize] {
        &self.angle_dims
    }

    /// Width of the encoded kernel input.
    pub fn input_dim(&self) -> usize {
        self.state_dim + self.angle_dims.len() + self.action_dim
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn actions(&self) -> &[Vec<f64>] {
        &self.actions
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn push(&mut self, state: &[f64], action: &[f64], target: &[f64]) -> Result<()> {
        self.check_state(state)?;
        self.check_action(action)?;
        if target.len() != self.state_dim {
            return Err(Error::DimensionMismatch {
                context: "dataset target",
                expected: self.state_dim,
                got: target.len(),
            });
        }
        self.states.push(state.to_vec());
        self.actions.push(action.to_vec());
        self.targets.push(target.to_vec());
        Ok(())
    }

    /// Record a transition, storing `next - state` (angle deltas wrapped).
    pub fn push_transition(&mut self, state: &[f64], action: &[f64], next: &[f64]) -> Result<()> {
        let delta = self.delta(state, next)?;
        self.push(state, action, &delta)
    }

    pub fn delta(&self, state: &[f64], next: &[f64]) -> Result<Vec<f64>> {
        self.check_state(state)?;
        self.check_state(next)?;
        let mut delta: Vec<f64> = next.iter().zip(state).map(|(n, s)| n - s).collect();
        for &d in &self.angle_dims {
            delta[d] = wrap_angle(delta[d]);
        }
        Ok(delta)
    }

    pub fn extend_from(&mut self, other: &GpDataset) -> Result<()> {
        if other.state_dim != self.state_dim || other.action_dim != self.action_dim {
            return Err(Error::DimensionMismatch {
                context: "dataset extend",
                expected: self.state_dim + self.action_dim,
                got: other.state_dim + other.action_dim,
            });
        }
        self.states.extend_from_slice(&other.states);
        self.actions.extend_from_slice(&other.actions);
        self.targets.extend_from_slice(&other.targets);
        Ok(())
    }

    /// Copy of the rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> GpDataset {
        GpDataset {
            state_dim: self.state_dim,
            action_dim: self.action_dim,
            angle_dims: self.angle_dims.clone(),
            states: indices.iter().map(|&i| self.states[i].clone()).collect(),
            actions: indices.iter().map(|&i| self.actions[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i].clone()).collect(),
        }
    }

    /// An empty dataset over the same spaces.
    pub fn empty_like(&self) -> GpDataset {
        self.subset(&[])
    }

    /// Write the kernel input for `(state, action)` into `out`.
    pub fn encode_into(&self, state: &[f64], action: &[f64], out: &mut [f64]) {
        encode(self.state_dim, &self.angle_dims, state, action, out);
    }

    pub fn encode(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.input_dim()];
        self.encode_into(state, action, &mut out);
        out
    }

    pub(crate) fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.state_dim {
            return Err(Error::DimensionMismatch {
                context: "state",
                expected: self.state_dim,
                got: state.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_action(&self, action: &[f64]) -> Result<()> {
        if action.len() != self.action_dim {
            return Err(Error::DimensionMismatch {
                context: "action",
                expected: self.action_dim,
                got: action.len(),
            });
        }
        Ok(())
    }

    /// Structural checks for data that did not come through `push`.
    pub fn validate(&self) -> Result<()> {
        if self.states.len() != self.actions.len() || self.states.len() != self.targets.len() {
            return Err(Error::InvalidConfig("dataset columns have different lengths".into()));
        }
        if self.angle_dims.iter().any(|&d| d >= self.state_dim) {
            return Err(Error::InvalidConfig("angle dimension out of range".into()));
        }
        for ((s, a), t) in self.states.iter().zip(&self.actions).zip(&self.targets) {
            self.check_state(s)?;
            self.check_action(a)?;
            if t.len() != self.state_dim {
                return Err(Error::DimensionMismatch {
                    context: "dataset target",
                    expected: self.state_dim,
                    got: t.len(),
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn encode(state_dim: usize, angle_dims: &[usize], state: &[f64], action: &[f64], out: &mut [f64]) {
    let mut k = 0;
    let mut angles = angle_dims.iter().peekable();
    for (i, &s) in state.iter().enumerate().take(state_dim) {
        if angles.peek() == Some(&&i) {
            angles.next();
            out[k] = s.sin();
            out[k + 1] = s.cos();
            k += 2;
        } else {
            out[k] = s;
            k += 1;
        }
    }
    out[k..k + action.len()].copy_from_slice(action);
}
