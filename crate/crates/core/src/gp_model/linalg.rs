//! Dense row-major helpers for symmetric positive-definite systems.

/// In-place lower Cholesky factor of the row-major `n x n` matrix `a`.
/// The strict upper triangle is zeroed. On failure returns the offending
/// pivot index and value.
pub(crate) fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<(), (usize, f64)> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err((j, d));
        }
        let ljj = d.sqrt();
        a[j * n + j] = ljj;
        for k in (j + 1)..n {
            a[j * n + k] = 0.0;
        }
        for i in (j + 1)..n {
            let (upper, lower) = a.split_at_mut(i * n);
            let row_j = &upper[j * n..j * n + j];
            let row_i = &mut lower[..n];
            let mut s = row_i[j];
            for k in 0..j {
                s -= row_i[k] * row_j[k];
            }
            row_i[j] = s / ljj;
        }
    }
    Ok(())
}

/// Solve `L x = b` in place for lower-triangular row-major `l`.
pub(crate) fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let mut s = b[i];
        for (k, lik) in row.iter().enumerate() {
            s -= lik * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solve `L^T x = b` in place for lower-triangular row-major `l`.
pub(crate) fn backward_solve_transposed(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Row-major inverse of a lower-triangular matrix.
pub(crate) fn lower_inverse(l: &[f64], n: usize) -> Vec<f64> {
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        let lii = l[i * n + i];
        inv[i * n + i] = 1.0 / lii;
        for j in 0..i {
            let mut s = 0.0;
            for k in j..i {
                s += l[i * n + k] * inv[k * n + j];
            }
            inv[i * n + j] = -s / lii;
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let x = (i as f64) * 0.3;
                let y = (j as f64) * 0.3;
                a[i * n + j] = (-(x - y) * (x - y)).exp();
            }
            a[i * n + i] += 0.1;
        }
        a
    }

    #[test]
    fn factor_reconstructs() {
        let n = 6;
        let a = spd(n);
        let mut l = a.clone();
        cholesky_in_place(&mut l, n).unwrap();
        for i in 0..n {
            for j in 0..n {
                let r: f64 = (0..n).map(|k| l[i * n + k] * l[j * n + k]).sum();
                assert!((r - a[i * n + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_and_solves_agree() {
        let n = 5;
        let mut l = spd(n);
        cholesky_in_place(&mut l, n).unwrap();
        let inv = lower_inverse(&l, n);
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        let mut x = b.clone();
        forward_solve(&l, n, &mut x);
        for i in 0..n {
            let y: f64 = (0..n).map(|k| inv[i * n + k] * b[k]).sum();
            assert!((y - x[i]).abs() < 1e-12);
        }
        backward_solve_transposed(&l, n, &mut x);
        for i in 0..n {
            let r: f64 = (0..n)
                .map(|j| {
                    let lj: f64 = (0..n).map(|k| l[i * n + k] * l[j * n + k]).sum();
                    lj * x[j]
                })
                .sum();
            assert!((r - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn reports_failing_pivot() {
        let mut a = vec![1.0, 2.0, 2.0, 1.0];
        let err = cholesky_in_place(&mut a, 2).unwrap_err();
        assert_eq!(err.0, 1);
        assert!(err.1 < 0.0);
    }
}
