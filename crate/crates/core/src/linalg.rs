//! Small dense matrix algebra: Hermitian eigendecomposition (cyclic Jacobi),
//! PSD square roots and the symmetric-logarithmic-derivative solver.
//!
//! Every routine works for both real symmetric and complex Hermitian
//! matrices through [`nalgebra::ComplexField`]. Dimensions in this crate are
//! at most 16, so the Jacobi sweep is cheap and fully deterministic.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type ComplexMatrix = DMatrix<Complex64>;
pub type RealMatrix = DMatrix<f64>;

/// Absolute Hermiticity tolerance, scaled by `max(1, max |a_ij|)`.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues above `-PSD_TOL` are clamped to zero by [`psd_sqrt`].
pub const PSD_TOL: f64 = 1e-10;
/// Smallest eigenvalue a state may have before the SLD equation is rejected.
pub const SINGULAR_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (max |a - a^H| = {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("state is singular (min eigenvalue {min_eigenvalue:e})")]
    SingularState { min_eigenvalue: f64 },
    #[error("derivative is not traceless (trace {trace:e})")]
    NotTraceless { trace: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
}

/// Spectral decomposition `a = V diag(λ) V^H` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermitianEig<T: ComplexField<RealField = f64>> {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<T>,
}

impl<T: ComplexField<RealField = f64>> HermitianEig<T> {
    /// Rebuilds `V f(Λ) V^H` for a real function of the eigenvalues.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> DMatrix<T> {
        let v = &self.eigenvectors;
        let n = v.nrows();
        let mut scaled = v.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let s = T::from_real(f(lambda));
            for i in 0..n {
                scaled[(i, j)] = scaled[(i, j)].clone() * s.clone();
            }
        }
        hermitian_part(&(scaled * v.adjoint()))
    }

    pub fn reconstruct(&self) -> DMatrix<T> {
        self.map_eigenvalues(|l| l)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }
}

/// `(a + a^H) / 2`.
pub fn hermitian_part<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> DMatrix<T> {
    let half = T::from_real(0.5);
    (a + a.adjoint()) * half
}

fn max_abs<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> f64 {
    a.iter().map(|z| z.clone().modulus()).fold(0.0, f64::max)
}

/// Largest entrywise deviation from Hermiticity, `max |a - a^H|`.
pub fn hermitian_deviation<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> f64 {
    max_abs(&(a - a.adjoint()))
}

fn check_hermitian<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<(), LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    let deviation = hermitian_deviation(a);
    if deviation > HERMITIAN_TOL * max_abs(a).max(1.0) || !deviation.is_finite() {
        return Err(LinalgError::NotHermitian { deviation });
    }
    Ok(())
}

/// Cyclic Jacobi eigendecomposition of a Hermitian (or real symmetric) matrix.
///
/// The input is symmetrized before the sweep. Eigenvalues are returned in
/// ascending order with matching eigenvector columns.
pub fn hermitian_eig<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<HermitianEig<T>, LinalgError> {
    check_hermitian(a)?;
    let n = a.nrows();
    let mut m = hermitian_part(a);
    let mut v = DMatrix::<T>::identity(n, n);

    let frob2: f64 = m.iter().map(|z| z.clone().modulus_squared()).sum();
    let target = (f64::EPSILON * f64::EPSILON) * frob2.max(f64::MIN_POSITIVE);

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].clone().modulus_squared();
            }
        }
        if off <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].clone().real()).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| diag[i]));
    let mut eigenvectors = DMatrix::<T>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &v.column(src));
    }
    Ok(HermitianEig { eigenvalues, eigenvectors })
}

/// One Jacobi rotation annihilating `m[(p, q)]`; accumulates into `v`.
fn rotate<T: ComplexField<RealField = f64>>(m: &mut DMatrix<T>, v: &mut DMatrix<T>, p: usize, q: usize) {
    let apq = m[(p, q)].clone();
    let mag = apq.clone().modulus();
    if mag == 0.0 {
        return;
    }
    let app = m[(p, p)].clone().real();
    let aqq = m[(q, q)].clone().real();
    // Phase that makes the pivot real and positive.
    let phase = apq.clone().unscale(mag).conjugate();

    let theta = (aqq - app) / (2.0 * mag);
    let t = if theta.is_infinite() { 0.0 } else { theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt()) };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // Unitary acting on columns p, q.
    let vpp = T::from_real(c);
    let vpq = T::from_real(s);
    let vqp = phase.clone() * T::from_real(-s);
    let vqq = phase * T::from_real(c);

    let n = m.nrows();
    for k in 0..n {
        let mkp = m[(k, p)].clone();
        let mkq = m[(k, q)].clone();
        m[(k, p)] = mkp.clone() * vpp.clone() + mkq.clone() * vqp.clone();
        m[(k, q)] = mkp * vpq.clone() + mkq * vqq.clone();
    }
    for k in 0..n {
        let mpk = m[(p, k)].clone();
        let mqk = m[(q, k)].clone();
        m[(p, k)] = vpp.clone().conjugate() * mpk.clone() + vqp.clone().conjugate() * mqk.clone();
        m[(q, k)] = vpq.clone().conjugate() * mpk + vqq.clone().conjugate() * mqk;
    }
    m[(p, q)] = T::zero();
    m[(q, p)] = T::zero();
    m[(p, p)] = T::from_real(m[(p, p)].clone().real());
    m[(q, q)] = T::from_real(m[(q, q)].clone().real());

    for k in 0..n {
        let vkp = v[(k, p)].clone();
        let vkq = v[(k, q)].clone();
        v[(k, p)] = vkp.clone() * vpp.clone() + vkq.clone() * vqp.clone();
        v[(k, q)] = vkp * vpq.clone() + vkq * vqq.clone();
    }
}

fn clamp_tolerance(eig: &HermitianEig<impl ComplexField<RealField = f64>>) -> f64 {
    PSD_TOL * eig.max_eigenvalue().abs().max(1.0)
}

/// Principal square root of a positive semidefinite matrix.
pub fn psd_sqrt<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<DMatrix<T>, LinalgError> {
    let eig = hermitian_eig(a)?;
    let tol = clamp_tolerance(&eig);
    if eig.min_eigenvalue() < -tol {
        return Err(LinalgError::NotPsd { min_eigenvalue: eig.min_eigenvalue() });
    }
    Ok(eig.map_eigenvalues(|l| l.max(0.0).sqrt()))
}

/// `a^{-1/2}` for a positive definite matrix.
pub fn pd_inv_sqrt<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<DMatrix<T>, LinalgError> {
    let eig = hermitian_eig(a)?;
    if eig.min_eigenvalue() <= 0.0 {
        return Err(LinalgError::NotPsd { min_eigenvalue: eig.min_eigenvalue() });
    }
    Ok(eig.map_eigenvalues(|l| 1.0 / l.sqrt()))
}

/// Inverse of a positive definite matrix through its spectrum.
pub fn pd_inverse<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<DMatrix<T>, LinalgError> {
    let eig = hermitian_eig(a)?;
    if eig.min_eigenvalue() <= 0.0 {
        return Err(LinalgError::NotPsd { min_eigenvalue: eig.min_eigenvalue() });
    }
    Ok(eig.map_eigenvalues(|l| 1.0 / l))
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Solves `drho = (L rho + rho L) / 2` for the Hermitian `L`.
///
/// Works in the eigenbasis of `rho`, where `L_jk = 2 drho_jk / (λ_j + λ_k)`.
pub fn solve_sld(rho: &ComplexMatrix, drho: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    if rho.nrows() != drho.nrows() {
        return Err(LinalgError::DimMismatch { left: rho.nrows(), right: drho.nrows() });
    }
    check_hermitian(drho)?;
    let trace = drho.trace();
    if trace.norm() > 1e-10 {
        return Err(LinalgError::NotTraceless { trace: trace.norm() });
    }
    let eig = hermitian_eig(rho)?;
    if eig.min_eigenvalue() <= SINGULAR_TOL {
        return Err(LinalgError::SingularState { min_eigenvalue: eig.min_eigenvalue() });
    }
    let v = &eig.eigenvectors;
    let mut l = v.adjoint() * hermitian_part(drho) * v;
    let lambda = &eig.eigenvalues;
    for j in 0..l.nrows() {
        for k in 0..l.ncols() {
            l[(j, k)] *= 2.0 / (lambda[j] + lambda[k]);
        }
    }
    Ok(hermitian_part(&(v * l * v.adjoint())))
}

/// Embeds a real matrix into the complex field.
pub fn complexify(a: &RealMatrix) -> ComplexMatrix {
    a.map(|x| Complex64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sigma1() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }

    #[test]
    fn identity_eigenvalues() {
        let eig = hermitian_eig(&ComplexMatrix::identity(2, 2)).unwrap();
        assert_abs_diff_eq!(eig.eigenvalues[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.eigenvalues[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sigma3_sorted() {
        let s3 = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(1., 0.), c(-1., 0.)]));
        let eig = hermitian_eig(&s3).unwrap();
        assert_eq!(eig.eigenvalues.as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn sigma1_eigenvectors() {
        let eig = hermitian_eig(&sigma1()).unwrap();
        assert_abs_diff_eq!(eig.eigenvalues[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.eigenvalues[1], 1.0, epsilon = 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // Up to a global phase: |<v, (1, -1)/sqrt2>| = 1 for λ = -1.
        let v0 = eig.eigenvectors.column(0);
        let overlap = (v0[0] * h - v0[1] * h).norm();
        assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-12);
        let v1 = eig.eigenvectors.column(1);
        let overlap = (v1[0] * h + v1[1] * h).norm();
        assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        assert!(matches!(hermitian_eig(&a), Err(LinalgError::NotHermitian { .. })));
    }

    #[test]
    fn sqrt_of_diagonal() {
        let a = RealMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let r = psd_sqrt(&a).unwrap();
        assert_abs_diff_eq!(r[(0, 0)], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r[(1, 1)], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r[(0, 1)], 0.0, epsilon = 1e-14);
        let i = psd_sqrt(&RealMatrix::identity(3, 3)).unwrap();
        assert_abs_diff_eq!((i - RealMatrix::identity(3, 3)).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sqrt_rejects_negative() {
        let a = RealMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1e-3]));
        assert!(matches!(psd_sqrt(&a), Err(LinalgError::NotPsd { .. })));
        // Rounding noise is clamped.
        let a = RealMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1e-12]));
        assert!(psd_sqrt(&a).is_ok());
    }

    #[test]
    fn sld_maximally_mixed() {
        let rho = ComplexMatrix::identity(2, 2) * c(0.5, 0.);
        let l = solve_sld(&rho, &(sigma1() * c(0.5, 0.))).unwrap();
        assert_abs_diff_eq!((l - sigma1()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sld_diagonal_lyapunov() {
        let rho = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(0.7, 0.), c(0.3, 0.)]));
        let drho = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(0.5, 0.), c(-0.5, 0.)]));
        let l = solve_sld(&rho, &drho).unwrap();
        assert_abs_diff_eq!(l[(0, 0)].re, 5.0 / 7.0, epsilon = 1e-14);
        assert_abs_diff_eq!(l[(1, 1)].re, -5.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(l[(0, 1)].norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sld_rejects_singular_state() {
        let rho = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.), c(0.0, 0.)]));
        let drho = sigma1() * c(0.5, 0.);
        assert!(matches!(solve_sld(&rho, &drho), Err(LinalgError::SingularState { .. })));
    }

    #[test]
    fn sld_rejects_trace() {
        let rho = ComplexMatrix::identity(2, 2) * c(0.5, 0.);
        assert!(matches!(solve_sld(&rho, &ComplexMatrix::identity(2, 2)), Err(LinalgError::NotTraceless { .. })));
    }
}
