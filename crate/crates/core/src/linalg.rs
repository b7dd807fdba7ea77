//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{MscError, Result};

pub const POWER_ITERATION_TOL: f64 = 1e-10;
const POWER_ITERATION_CAP: usize = 100_000;

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration, stopped at relative change `tol`.
pub fn largest_eigenvalue_psd(a: &DMatrix<f64>, tol: f64) -> Result<f64> {
    let d = a.nrows();
    if d == 0 || a.ncols() != d {
        return Err(MscError::invalid("power iteration needs a non-empty square matrix"));
    }
    // Fixed, slightly irregular start vector so results are reproducible and
    // unlikely to be orthogonal to the top eigenvector.
    let mut v = nalgebra::DVector::from_iterator(d, (0..d).map(|i| 1.0 + 0.1 * ((i * 7 + 3) % 11) as f64));
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATION_CAP {
        let w = a * &v;
        let next = w.norm();
        if next == 0.0 {
            return Ok(0.0);
        }
        v = w / next;
        if (next - lambda).abs() <= tol * next {
            return Ok(next);
        }
        lambda = next;
    }
    Err(MscError::IterationCap {
        what: "power iteration",
        cap: POWER_ITERATION_CAP,
    })
}

/// `||A||_2^2`, the largest eigenvalue of `AᵀA`.
pub fn spectral_norm_sq(a: &DMatrix<f64>) -> Result<f64> {
    largest_eigenvalue_psd(&(a.transpose() * a), POWER_ITERATION_TOL)
}

pub fn cholesky(a: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(MscError::Factorization(format!("{what} has non-finite entries")));
    }
    Cholesky::new(a.clone()).ok_or_else(|| MscError::Factorization(format!("{what} is not positive definite")))
}

/// `log det A` for SPD `A` via its Cholesky factor.
pub fn log_det_spd(a: &DMatrix<f64>) -> Result<f64> {
    let chol = cholesky(a, "matrix")?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

pub fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    a.is_square() && (0..a.nrows()).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= tol * (1.0 + a[(i, j)].abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_diag_and_rank_one() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 5.0, 2.0]));
        assert!((largest_eigenvalue_psd(&a, 1e-12).unwrap() - 5.0).abs() < 1e-8);
        let u = nalgebra::DVector::from_vec(vec![1.0, 2.0, 2.0]);
        let r1 = &u * u.transpose();
        assert!((largest_eigenvalue_psd(&r1, 1e-12).unwrap() - 9.0).abs() < 1e-9);
        assert_eq!(largest_eigenvalue_psd(&DMatrix::zeros(2, 2), 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn power_iteration_matches_eigendecomposition() {
        let b = DMatrix::from_fn(6, 4, |i, j| ((i * 3 + j * 5) % 7) as f64 - 2.5);
        let g = b.transpose() * &b;
        let exact = g.clone().symmetric_eigen().eigenvalues.max();
        let approx = spectral_norm_sq(&b).unwrap();
        assert!((approx / exact - 1.0).abs() < 1e-8, "{approx} vs {exact}");
    }

    #[test]
    fn log_det() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        assert!((log_det_spd(&a).unwrap() - 8f64.ln()).abs() < 1e-12);
        assert!(log_det_spd(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    }
}
