//! Small dense helpers over `nalgebra`.

use alloc::vec::Vec;
use nalgebra::DMatrix;

pub type Matrix = DMatrix<f64>;

pub fn frobenius(m: &Matrix) -> f64 {
    libm::sqrt(m.iter().map(|x| x * x).sum::<f64>())
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `xᵀ M x`.
pub fn quadratic_form(m: &Matrix, x: &[f64]) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += x[i] * m[(i, j)] * x[j];
        }
    }
    total
}

/// Inverse of a positive-definite matrix, `None` if not positive definite.
pub fn inverse_pd(m: &Matrix) -> Option<Matrix> {
    m.clone().cholesky().map(|c| c.inverse())
}
