//! Minimal dense linear algebra for the ridge solvers: Cholesky on small
//! symmetric positive definite systems, with a deterministic jitter fallback
//! for rank-deficient designs (unpenalized fits on collinear bases).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Solves `M x = b` for symmetric positive semi-definite `M` (row-major,
/// `dim x dim`). On a failed pivot the diagonal is inflated by an escalating
/// multiple of its mean magnitude and the factorization retried, keeping the
/// solve deterministic on collinear inputs.
pub(crate) fn solve_spd<F: Scalar>(matrix: &[F], rhs: &[F], dim: usize) -> Result<Vec<F>> {
    debug_assert_eq!(matrix.len(), dim * dim);
    debug_assert_eq!(rhs.len(), dim);
    if dim == 0 {
        return Ok(Vec::new());
    }

    let mut diag_mean = F::zero();
    for i in 0..dim {
        diag_mean += matrix[i * dim + i].abs();
    }
    diag_mean /= F::from_usize(dim).unwrap();
    if diag_mean == F::zero() {
        diag_mean = F::one();
    }

    let mut jitter = F::zero();
    let ten = F::from_f64_lossy(10.0);
    for _attempt in 0..8 {
        match cholesky_solve(matrix, rhs, dim, jitter) {
            Some(x) => return Ok(x),
            None => {
                jitter = if jitter == F::zero() {
                    diag_mean * F::from_f64_lossy(1e-10)
                } else {
                    jitter * ten
                };
            }
        }
    }
    Err(Error::Numeric(
        "linear system is numerically singular even after regularization".into(),
    ))
}

/// One Cholesky factorization + back-substitution attempt with `jitter`
/// added to the diagonal; `None` when a pivot is not positive.
fn cholesky_solve<F: Scalar>(matrix: &[F], rhs: &[F], dim: usize, jitter: F) -> Option<Vec<F>> {
    let mut l = vec![F::zero(); dim * dim];
    for j in 0..dim {
        for i in j..dim {
            let mut sum = matrix[i * dim + j];
            if i == j {
                sum += jitter;
            }
            for k in 0..j {
                sum -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if sum <= F::zero() || !sum.is_finite() {
                    return None;
                }
                l[j * dim + j] = sum.sqrt();
            } else {
                l[i * dim + j] = sum / l[j * dim + j];
            }
        }
    }

    // Forward: L z = b.
    let mut z = vec![F::zero(); dim];
    for i in 0..dim {
        let mut sum = rhs[i];
        for k in 0..i {
            sum -= l[i * dim + k] * z[k];
        }
        z[i] = sum / l[i * dim + i];
    }
    // Backward: L^T x = z.
    let mut x = vec![F::zero(); dim];
    for i in (0..dim).rev() {
        let mut sum = z[i];
        for k in (i + 1)..dim {
            sum -= l[k * dim + i] * x[k];
        }
        x[i] = sum / l[i * dim + i];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_well_conditioned_system() {
        // M = [[4,1],[1,3]], b = [1,2] -> x = [1/11, 7/11].
        let m: Vec<f64> = vec![4.0, 1.0, 1.0, 3.0];
        let b: Vec<f64> = vec![1.0, 2.0];
        let x = solve_spd(&m, &b, 2).unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn singular_system_falls_back_to_jitter() {
        // Rank-1 matrix; jittered solve must return a finite least-norm-ish
        // solution rather than NaN.
        let m = vec![1.0, 1.0, 1.0, 1.0];
        let b = vec![2.0, 2.0];
        let x = solve_spd(&m, &b, 2).unwrap();
        assert!(x.iter().all(|v: &f64| v.is_finite()));
        let r0 = m[0] * x[0] + m[1] * x[1] - b[0];
        assert!(r0.abs() < 1e-6, "residual {r0} too large");
    }

    #[test]
    fn works_in_f32() {
        let m = vec![2.0f32, 0.0, 0.0, 2.0];
        let b = vec![2.0f32, 4.0];
        let x = solve_spd(&m, &b, 2).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6);
        assert!((x[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn empty_system_is_fine() {
        let x = solve_spd::<f64>(&[], &[], 0).unwrap();
        assert!(x.is_empty());
    }
}
