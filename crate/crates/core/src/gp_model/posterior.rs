use nalgebra::DMatrix;

use super::dataset::{encode, GpDataset};
use super::kernel::{se_scaled, KernelParams};
use super::linalg;
use crate::error::{Error, Result};

const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-4;
const NEGATIVE_VARIANCE_TOL: f64 = 1e-10;

/// Per-dimension predictive mean and standard deviation of the state delta.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibratedPrediction {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Row-major predictions for a batch of queries (`count x state_dim`).
#[derive(Clone, Debug, Default)]
pub struct BatchPrediction {
    pub mean: Vec<f64>,
    /// Empty when the standard deviation was not requested.
    pub std: Vec<f64>,
}

/// A fitted, immutable GP snapshot.
#[derive(Clone, Debug)]
pub struct GpPosterior {
    dataset: GpDataset,
    kernel: KernelParams,
    inv_lengthscales: Vec<f64>,
    /// Training inputs divided by the lengthscales, row-major `n x d`.
    scaled_inputs: Vec<f64>,
    /// Lower Cholesky factor of `K + (noise + jitter) I`, row-major.
    chol: Vec<f64>,
    /// `(L^-1)^T`, used for batched variance through one matrix product.
    chol_inv_t: DMatrix<f64>,
    /// `alphas[(j, i)]` is the weight of training point `j` for output `i`.
    alphas: DMatrix<f64>,
    jitter: f64,
}

impl GpPosterior {
    /// Condition the kernel on `dataset`. Regression targets are the stored
    /// deltas; every output dimension shares the factorization.
    pub fn fit(dataset: GpDataset, kernel: KernelParams) -> Result<Self> {
        kernel.validate()?;
        dataset.validate()?;
        let d = dataset.input_dim();
        if kernel.input_dim() != d {
            return Err(Error::DimensionMismatch {
                context: "kernel lengthscales",
                expected: d,
                got: kernel.input_dim(),
            });
        }
        if !kernel.output_scales.is_empty() && kernel.output_scales.len() != dataset.state_dim() {
            return Err(Error::DimensionMismatch {
                context: "kernel output scales",
                expected: dataset.state_dim(),
                got: kernel.output_scales.len(),
            });
        }
        let n = dataset.len();
        let p = dataset.state_dim();
        let inv_ls = kernel.inverse_lengthscales();
        let mut scaled_inputs = vec![0.0; n * d];
        for (row, (s, a)) in scaled_inputs
            .chunks_exact_mut(d.max(1))
            .zip(dataset.states().iter().zip(dataset.actions()))
        {
            dataset.encode_into(s, a, row);
            for (v, il) in row.iter_mut().zip(&inv_ls) {
                *v *= il;
            }
        }

        let s2 = kernel.signal_variance;
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            let xi = &scaled_inputs[i * d..(i + 1) * d];
            for j in 0..=i {
                let xj = &scaled_inputs[j * d..(j + 1) * d];
                let k = se_scaled(s2, xi, xj);
                gram[i * n + j] = k;
                gram[j * n + i] = k;
            }
        }

        let mut jitter = JITTER_START * s2;
        let chol = loop {
            let mut a = gram.clone();
            for i in 0..n {
                a[i * n + i] += kernel.noise_variance + jitter;
            }
            match linalg::cholesky_in_place(&mut a, n) {
                Ok(()) => break a,
                Err((index, pivot)) => {
                    if jitter * 10.0 > JITTER_MAX * s2 * (1.0 + 1e-9) {
                        return Err(Error::Factorization { index, pivot, jitter });
                    }
                    jitter *= 10.0;
                }
            }
        };

        let mut alphas = DMatrix::zeros(n, p);
        let mut y = vec![0.0; n];
        for out in 0..p {
            for (j, t) in dataset.targets().iter().enumerate() {
                y[j] = t[out];
            }
            linalg::forward_solve(&chol, n, &mut y);
            linalg::backward_solve_transposed(&chol, n, &mut y);
            for j in 0..n {
                alphas[(j, out)] = y[j];
            }
        }
        let inv = linalg::lower_inverse(&chol, n);
        // row-major L^-1 read as column-major is exactly (L^-1)^T
        let chol_inv_t = DMatrix::from_vec(n, n, inv);

        Ok(Self {
            dataset,
            kernel,
            inv_lengthscales: inv_ls,
            scaled_inputs,
            chol,
            chol_inv_t,
            alphas,
            jitter,
        })
    }

    pub fn dataset(&self) -> &GpDataset {
        &self.dataset
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.dataset.state_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.dataset.action_dim()
    }

    /// Diagonal jitter that was needed for the factorization to succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Row-major lower Cholesky factor of `K + (noise + jitter) I`.
    pub fn cholesky_factor(&self) -> &[f64] {
        &self.chol
    }

    fn scaled_query(&self, state: &[f64], action: &[f64], out: &mut [f64]) {
        encode(
            self.dataset.state_dim(),
            self.dataset.angle_dims(),
            state,
            action,
            out,
        );
        for (v, il) in out.iter_mut().zip(&self.inv_lengthscales) {
            *v *= il;
        }
    }

    fn cross_kernel(&self, z: &[f64], out: &mut [f64]) {
        let d = z.len();
        let s2 = self.kernel.signal_variance;
        for (j, k) in out.iter_mut().enumerate() {
            *k = se_scaled(s2, z, &self.scaled_inputs[j * d..(j + 1) * d]);
        }
    }

    fn mean_from_cross(&self, kx: &[f64], out: usize) -> f64 {
        let mut m = 0.0;
        for (j, k) in kx.iter().enumerate() {
            m += k * self.alphas[(j, out)];
        }
        m
    }

    fn clamp_variance(var: f64, scale: f64) -> Result<f64> {
        if var >= 0.0 {
            Ok(var)
        } else if var > -NEGATIVE_VARIANCE_TOL * scale.max(1.0) {
            Ok(0.0)
        } else {
            Err(Error::NegativeVariance(var))
        }
    }

    /// Posterior mean and standard deviation of the state delta at `(state, action)`.
    pub fn predict(&self, state: &[f64], action: &[f64]) -> Result<CalibratedPrediction> {
        self.dataset.check_state(state)?;
        self.dataset.check_action(action)?;
        let n = self.len();
        let p = self.state_dim();
        let s2 = self.kernel.signal_variance;
        let mut z = vec![0.0; self.dataset.input_dim()];
        self.scaled_query(state, action, &mut z);
        let mut kx = vec![0.0; n];
        self.cross_kernel(&z, &mut kx);
        let mean = (0..p).map(|o| self.mean_from_cross(&kx, o)).collect();
        linalg::forward_solve(&self.chol, n, &mut kx);
        let reduction: f64 = kx.iter().map(|v| v * v).sum();
        let sd = Self::clamp_variance(s2 - reduction, s2)?.sqrt();
        Ok(CalibratedPrediction {
            mean,
            std: (0..p).map(|o| sd * self.kernel.output_scale(o)).collect(),
        })
    }

    /// Batched prediction for `count` queries given as row-major slices.
    ///
    /// Means are computed in the same order as [`GpPosterior::predict`] and
    /// agree with it bit for bit; standard deviations go through a matrix
    /// product and agree to rounding.
    pub fn predict_batch(
        &self,
        states: &[f64],
        actions: &[f64],
        count: usize,
        with_std: bool,
    ) -> Result<BatchPrediction> {
        let p = self.state_dim();
        let q = self.action_dim();
        if states.len() != count * p {
            return Err(Error::DimensionMismatch {
                context: "batch states",
                expected: count * p,
                got: states.len(),
            });
        }
        if actions.len() != count * q {
            return Err(Error::DimensionMismatch {
                context: "batch actions",
                expected: count * q,
                got: actions.len(),
            });
        }
        let n = self.len();
        let d = self.dataset.input_dim();
        let s2 = self.kernel.signal_variance;
        let mut mean = vec![0.0; count * p];
        if n == 0 {
            let std = if with_std {
                (0..count * p).map(|k| s2.sqrt() * self.kernel.output_scale(k % p)).collect()
            } else {
                Vec::new()
            };
            return Ok(BatchPrediction { mean, std });
        }
        let mut kstar = DMatrix::<f64>::zeros(count, n);
        let mut z = vec![0.0; d];
        let mut kx = vec![0.0; n];
        for i in 0..count {
            self.scaled_query(&states[i * p..(i + 1) * p], &actions[i * q..(i + 1) * q], &mut z);
            self.cross_kernel(&z, &mut kx);
            for o in 0..p {
                mean[i * p + o] = self.mean_from_cross(&kx, o);
            }
            if with_std {
                for (j, k) in kx.iter().enumerate() {
                    kstar[(i, j)] = *k;
                }
            }
        }
        if !with_std {
            return Ok(BatchPrediction { mean, std: Vec::new() });
        }
        let w = &kstar * &self.chol_inv_t;
        let mut reduction = vec![0.0; count];
        for col in w.column_iter() {
            for (r, v) in reduction.iter_mut().zip(col.iter()) {
                *r += v * v;
            }
        }
        let mut std = vec![0.0; count * p];
        for (i, r) in reduction.iter().enumerate() {
            let sd = Self::clamp_variance(s2 - r, s2)?.sqrt();
            for o in 0..p {
                std[i * p + o] = sd * self.kernel.output_scale(o);
            }
        }
        Ok(BatchPrediction { mean, std })
    }

    /// Information gain `0.5 log det(I + K / noise)` of the training inputs.
    pub fn mutual_information(&self) -> f64 {
        let n = self.len();
        let log_diag: f64 = (0..n).map(|i| self.chol[i * n + i].ln()).sum();
        (log_diag - 0.5 * n as f64 * self.kernel.noise_variance.ln()).max(0.0)
    }
}

/// Fraction of `holdout` rows whose delta lies inside `mean +- beta * std` in
/// every dimension.
pub fn calibration_coverage(post: &GpPosterior, holdout: &GpDataset, beta: f64) -> Result<f64> {
    if holdout.is_empty() {
        return Err(Error::InvalidConfig("calibration holdout is empty".into()));
    }
    let mut inside = 0usize;
    for ((s, a), t) in holdout.states().iter().zip(holdout.actions()).zip(holdout.targets()) {
        let pred = post.predict(s, a)?;
        let ok = t
            .iter()
            .zip(pred.mean.iter().zip(&pred.std))
            .all(|(y, (m, sd))| (y - m).abs() <= beta * sd);
        if ok {
            inside += 1;
        }
    }
    Ok(inside as f64 / holdout.len() as f64)
}
