//! Small dense helpers shared across modules.

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector3};
use num_complex::Complex64;

pub type C64 = Complex64;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Spin-1/2 operators `sigma_mu / 2`.
pub fn spin_half() -> [Matrix2<C64>; 3] {
    let z = c(0.0, 0.0);
    let h = c(0.5, 0.0);
    [
        Matrix2::new(z, h, h, z),
        Matrix2::new(z, c(0.0, -0.5), c(0.0, 0.5), z),
        Matrix2::new(h, z, z, -h),
    ]
}

/// Totally antisymmetric symbol on zero-based indices.
#[inline]
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// The vector `beta` with `B[m][n] = eps[m][n][g] * beta[g]`.
pub fn dual_vector(b: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(b[(1, 2)], b[(2, 0)], b[(0, 1)])
}

/// Inverse of [`dual_vector`].
pub fn antisymmetric_from_dual(beta: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, beta[2], -beta[1], //
        -beta[2], 0.0, beta[0], //
        beta[1], -beta[0], 0.0,
    )
}

pub fn symmetrize3(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_abs3(m: &Matrix3<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Smallest eigenvalue of a Hermitian matrix (upper and lower triangles are
/// averaged first).
pub fn hermitian_min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    h.symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn trace(m: &DMatrix<C64>) -> C64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// `tr(a * b)` without forming the product.
pub fn trace_of_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let n = a.nrows();
    let mut acc = c(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Half-open least-squares slope/intercept fit with coefficient of
/// determination.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - (intercept + slope * a)).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_vector_roundtrip() {
        let beta = Vector3::new(0.3, -1.2, 2.5);
        let b = antisymmetric_from_dual(&beta);
        for m in 0..3 {
            for n in 0..3 {
                let expect: f64 = (0..3).map(|g| levi_civita(m, n, g) * beta[g]).sum();
                assert_eq!(b[(m, n)], expect);
            }
        }
        assert_eq!(dual_vector(&b), beta);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let (s, i, r2) = linear_fit(&x, &y);
        assert!((s + 0.5).abs() < 1e-14 && (i - 3.0).abs() < 1e-14);
        assert!((r2 - 1.0).abs() < 1e-14);
    }
}
