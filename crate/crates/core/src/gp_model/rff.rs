use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use std::f64::consts::TAU;

use super::dataset::encode;
use super::posterior::GpPosterior;
use crate::error::{Error, Result};
use crate::rng;

/// One function drawn (approximately) from the GP posterior through random
/// Fourier features. Frozen after construction.
#[derive(Clone, Debug)]
pub struct RffSample {
    state_dim: usize,
    action_dim: usize,
    angle_dims: Vec<usize>,
    inv_lengthscales: Vec<f64>,
    /// Row-major `m x d` spectral frequencies, in lengthscale units.
    frequencies: Vec<f64>,
    phases: Vec<f64>,
    /// One weight vector of length `m` per output dimension.
    weights: Vec<Vec<f64>>,
    feature_scale: f64,
}

impl RffSample {
    pub fn feature_count(&self) -> usize {
        self.phases.len()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn input_dim(&self) -> usize {
        self.inv_lengthscales.len()
    }

    fn features_into(&self, state: &[f64], action: &[f64], z: &mut [f64], phi: &mut [f64]) {
        encode(self.state_dim, &self.angle_dims, state, action, z);
        for (v, il) in z.iter_mut().zip(&self.inv_lengthscales) {
            *v *= il;
        }
        let d = z.len();
        for (k, f) in phi.iter_mut().enumerate() {
            let w = &self.frequencies[k * d..(k + 1) * d];
            let dot: f64 = w.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
            *f = self.feature_scale * (dot + self.phases[k]).cos();
        }
    }

    /// Sampled state delta at `(state, action)`.
    pub fn eval(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.state_dim {
            return Err(Error::DimensionMismatch {
                context: "rff state",
                expected: self.state_dim,
                got: state.len(),
            });
        }
        if action.len() != self.action_dim {
            return Err(Error::DimensionMismatch {
                context: "rff action",
                expected: self.action_dim,
                got: action.len(),
            });
        }
        let mut z = vec![0.0; self.input_dim()];
        let mut phi = vec![0.0; self.feature_count()];
        self.features_into(state, action, &mut z, &mut phi);
        Ok(self
            .weights
            .iter()
            .map(|w| w.iter().zip(&phi).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Row-major batch evaluation into `out` (`count x state_dim`).
    pub fn eval_batch(&self, states: &[f64], actions: &[f64], count: usize, out: &mut [f64]) {
        let p = self.state_dim;
        let q = self.action_dim;
        let mut z = vec![0.0; self.input_dim()];
        let mut phi = vec![0.0; self.feature_count()];
        for i in 0..count {
            self.features_into(&states[i * p..(i + 1) * p], &actions[i * q..(i + 1) * q], &mut z, &mut phi);
            for (o, w) in self.weights.iter().enumerate() {
                out[i * p + o] = w.iter().zip(&phi).map(|(a, b)| a * b).sum();
            }
        }
    }
}

/// Draw a posterior function sample with `m` random Fourier features.
///
/// Frequencies and phases come from the spectral density of the
/// squared-exponential kernel. Weights are the ridge solution against
/// targets perturbed with likelihood noise, centred on a prior weight draw,
/// which is an exact sample of the Bayesian linear-regression posterior in
/// feature space. The primal system is solved when `m <= n`, otherwise the
/// equivalent `n x n` dual system.
pub fn sample_rff(post: &GpPosterior, m: usize, seed: u64) -> Result<RffSample> {
    if m == 0 {
        return Err(Error::InvalidConfig("random feature count must be >= 1".into()));
    }
    let ds = post.dataset();
    let kernel = post.kernel();
    let d = ds.input_dim();
    let p = ds.state_dim();
    let n = ds.len();
    let mut rng = rng::seeded(seed);

    let frequencies: Vec<f64> = (0..m * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let phases: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * TAU).collect();
    let mut sample = RffSample {
        state_dim: p,
        action_dim: ds.action_dim(),
        angle_dims: ds.angle_dims().to_vec(),
        inv_lengthscales: kernel.lengthscales.iter().map(|l| 1.0 / l).collect(),
        frequencies,
        phases,
        weights: Vec::new(),
        feature_scale: (2.0 * kernel.signal_variance / m as f64).sqrt(),
    };

    let noise = kernel.noise_variance;
    let noise_std = noise.sqrt();
    let mut phi = DMatrix::<f64>::zeros(n, m);
    {
        let mut z = vec![0.0; d];
        let mut row = vec![0.0; m];
        for (i, (s, a)) in ds.states().iter().zip(ds.actions()).enumerate() {
            sample.features_into(s, a, &mut z, &mut row);
            for (k, v) in row.iter().enumerate() {
                phi[(i, k)] = *v;
            }
        }
    }

    let primal = m <= n;
    let system = if n == 0 {
        None
    } else if primal {
        let mut a = phi.transpose() * &phi / noise;
        for k in 0..m {
            a[(k, k)] += 1.0;
        }
        Some(factor(a)?)
    } else {
        let mut g = &phi * phi.transpose();
        for i in 0..n {
            g[(i, i)] += noise;
        }
        Some(factor(g)?)
    };

    let mut weights = Vec::with_capacity(p);
    for out in 0..p {
        // Work on targets divided by the output scale, then scale back.
        let c = kernel.output_scale(out);
        let w0 = DVector::<f64>::from_fn(m, |_, _| rng.sample(StandardNormal));
        let perturbed = DVector::<f64>::from_fn(n, |i, _| {
            ds.targets()[i][out] / c + noise_std * rng.sample::<f64, _>(StandardNormal)
        });
        let w = match &system {
            None => w0,
            Some(chol) if primal => {
                let rhs = phi.transpose() * &perturbed / noise + &w0;
                chol.solve(&rhs)
            }
            Some(chol) => {
                let resid = &perturbed - &phi * &w0;
                &w0 + phi.transpose() * chol.solve(&resid)
            }
        };
        weights.push(w.iter().map(|v| v * c).collect());
    }
    sample.weights = weights;
    Ok(sample)
}

fn factor(mut a: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)]).fold(0.0f64, f64::max).max(1.0);
    let mut jitter = 1e-10 * scale;
    loop {
        if let Some(c) = a.clone().cholesky() {
            return Ok(c);
        }
        if jitter > 1e-4 * scale {
            return Err(Error::Factorization {
                index: 0,
                pivot: f64::NAN,
                jitter,
            });
        }
        for i in 0..n {
            a[(i, i)] += jitter;
        }
        jitter *= 10.0;
    }
}
