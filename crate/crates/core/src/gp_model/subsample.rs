use super::dataset::GpDataset;
use super::kernel::{se_scaled, KernelParams};

/// Greedy max-posterior-variance selection of at most `max_points` rows.
///
/// Each round adds the candidate whose noisy-data posterior variance, given
/// the rows picked so far, is largest (lowest index on ties). This is a
/// pivoted incremental Cholesky over the candidates and costs
/// `O(len * max_points^2)`. The result is sorted by index; when the dataset
/// already fits, every index is returned.
pub fn select_max_variance(dataset: &GpDataset, kernel: &KernelParams, max_points: usize) -> Vec<usize> {
    let n = dataset.len();
    if n <= max_points {
        return (0..n).collect();
    }
    let d = dataset.input_dim();
    let inv_ls = kernel.inverse_lengthscales();
    let mut z = vec![0.0; n * d];
    for (row, (s, a)) in z
        .chunks_exact_mut(d)
        .zip(dataset.states().iter().zip(dataset.actions()))
    {
        dataset.encode_into(s, a, row);
        for (v, il) in row.iter_mut().zip(&inv_ls) {
            *v *= il;
        }
    }
    let s2 = kernel.signal_variance;
    let noise = kernel.noise_variance;

    let mut residual = vec![s2; n];
    // cols[r][c]: r-th column of L^-1 k(S, c) for the r-th selected pivot
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(max_points);
    let mut chosen = Vec::with_capacity(max_points);
    let mut taken = vec![false; n];

    for _ in 0..max_points {
        let mut best = usize::MAX;
        let mut best_var = f64::NEG_INFINITY;
        for c in 0..n {
            if !taken[c] && residual[c] > best_var {
                best_var = residual[c];
                best = c;
            }
        }
        if best == usize::MAX {
            break;
        }
        taken[best] = true;
        chosen.push(best);
        let pivot = (residual[best] + noise).sqrt();
        let zb = &z[best * d..(best + 1) * d];
        let mut col = vec![0.0; n];
        for c in 0..n {
            if taken[c] && c != best {
                continue;
            }
            let mut v = se_scaled(s2, &z[c * d..(c + 1) * d], zb);
            for prev in &cols {
                v -= prev[c] * prev[best];
            }
            col[c] = v / pivot;
            residual[c] = (residual[c] - col[c] * col[c]).max(0.0);
        }
        cols.push(col);
    }
    chosen.sort_unstable();
    chosen
}
