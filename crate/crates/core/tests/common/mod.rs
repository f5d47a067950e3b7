//! Independent oracles for integration tests. Matrix functions here go through
//! nalgebra's symmetric eigensolver rather than the library's own.
#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};

pub fn sym_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let e = SymmetricEigen::new(m.clone());
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(f));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// `J = I + x xᵀ / (1 − r²)`.
pub fn qfi(x: &[f64; 3]) -> DMatrix<f64> {
    let v = Vector3::from(*x);
    let j = Matrix3::identity() + v * v.transpose() / (1.0 - v.norm_squared());
    DMatrix::from_fn(3, 3, |i, k| j[(i, k)])
}

/// Inverse of the tomography Fisher matrix: `3 diag(1 − x_μ²)`.
pub fn tomo_fisher_inv(x: &[f64; 3]) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |i, k| if i == k { 3.0 * (1.0 - x[i] * x[i]) } else { 0.0 })
}

/// `(R, Tr R)` with `R = √(√J⁻¹ H √J⁻¹)`.
pub fn r_matrix(j: &DMatrix<f64>, h: &DMatrix<f64>) -> DMatrix<f64> {
    let s = sym_fn(j, |l| 1.0 / l.sqrt());
    let inner = &s * h * &s;
    sym_fn(&((&inner + inner.transpose()) * 0.5), |l| l.max(0.0).sqrt())
}

pub fn min_trace(j: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    r_matrix(j, h).trace().powi(2)
}

/// `√J R √J / Tr R`.
pub fn fisher_target(j: &DMatrix<f64>, h: &DMatrix<f64>) -> DMatrix<f64> {
    let r = r_matrix(j, h);
    let sj = sym_fn(j, f64::sqrt);
    &sj * &r * &sj / r.trace()
}

/// Qubit Bures distance `4 (1 − √((1 + x·y + √((1−|x|²)(1−|y|²))) / 2))`.
pub fn qubit_bures(x: &[f64; 3], y: &[f64; 3]) -> f64 {
    let (vx, vy) = (Vector3::from(*x), Vector3::from(*y));
    let s = ((1.0 - vx.norm_squared()) * (1.0 - vy.norm_squared())).sqrt();
    4.0 * (1.0 - ((1.0 + vx.dot(&vy) + s) / 2.0).sqrt())
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

pub fn qest_bin() -> &'static str {
    env!("CARGO_BIN_EXE_qest")
}
