//! Random states, weights, POVMs and models for self-checks and tests.

use nalgebra::{DVector, Matrix3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{pd_inv_sqrt, ComplexMatrix, RealMatrix};
use crate::measurement::{Povm, PovmElement};
use crate::state::{DensityMatrix, ModelDerivatives, StokesPoint};

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Uniformly distributed direction in `R^d`.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| normal(rng));
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

/// Point with uniform direction and radius uniform in `[0, r_max]`.
pub fn ball_point<R: Rng + ?Sized>(rng: &mut R, r_max: f64) -> StokesPoint {
    let v = unit_vector(rng, 3) * rng.gen_range(0.0..r_max);
    StokesPoint::new([v[0], v[1], v[2]]).expect("radius below one")
}

/// Positive-definite `A Aᵀ + 0.1 I`.
pub fn pd_matrix<R: Rng + ?Sized>(rng: &mut R, d: usize) -> RealMatrix {
    let a = RealMatrix::from_fn(d, d, |_, _| normal(rng));
    &a * a.transpose() + RealMatrix::identity(d, d) * 0.1
}

/// Haar-distributed 3×3 rotation.
pub fn rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    let a = Matrix3::from_fn(|_, _| normal(rng));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..3 {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| Complex64::new(normal(rng), normal(rng)))
}

/// Full-rank state `B B† / Tr B B†`.
pub fn full_rank_state<R: Rng + ?Sized>(rng: &mut R, q: usize) -> DensityMatrix {
    let b = complex_gaussian(rng, q, q);
    let m = &b * b.adjoint();
    let tr = m.trace();
    DensityMatrix::new(m / tr).expect("normalized Gram matrix is a state")
}

/// POVM with `n` full-rank elements `S^{-1/2} A_k† A_k S^{-1/2}`.
pub fn povm<R: Rng + ?Sized>(rng: &mut R, q: usize, n: usize) -> Povm {
    let grams: Vec<ComplexMatrix> = (0..n)
        .map(|_| {
            let a = complex_gaussian(rng, q, q);
            a.adjoint() * a
        })
        .collect();
    let total = grams.iter().fold(ComplexMatrix::zeros(q, q), |acc, g| acc + g);
    let s = pd_inv_sqrt(&total).expect("sum of full-rank Gram matrices is positive definite");
    let elements = grams
        .iter()
        .enumerate()
        .map(|(k, g)| PovmElement { label: k.to_string(), op: &s * g * &s, provenance: None })
        .collect();
    Povm::new(q, elements).expect("normalized Gram family is complete")
}

/// Generalized Gell-Mann matrices: `q² − 1` traceless Hermitian generators.
pub fn gell_mann(q: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(q * q - 1);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    for j in 0..q {
        for k in (j + 1)..q {
            let mut s = ComplexMatrix::zeros(q, q);
            s[(j, k)] = one;
            s[(k, j)] = one;
            out.push(s);
            let mut a = ComplexMatrix::zeros(q, q);
            a[(j, k)] = -i;
            a[(k, j)] = i;
            out.push(a);
        }
    }
    for l in 1..q {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut d = ComplexMatrix::zeros(q, q);
        for m in 0..l {
            d[(m, m)] = one * norm;
        }
        d[(l, l)] = one * (-(l as f64) * norm);
        out.push(d);
    }
    out
}

/// Full-parameter model at a random full-rank state with Gell-Mann partials.
pub fn full_model<R: Rng + ?Sized>(rng: &mut R, q: usize) -> ModelDerivatives {
    let rho = full_rank_state(rng, q);
    ModelDerivatives::from_partials(rho, gell_mann(q)).expect("full-rank state admits SLDs")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn gell_mann_count_and_orthogonality() {
        for q in 2..=4 {
            let g = gell_mann(q);
            assert_eq!(g.len(), q * q - 1);
            for (a, x) in g.iter().enumerate() {
                assert!(x.trace().norm() < 1e-12);
                for (b, y) in g.iter().enumerate() {
                    let ip = crate::linalg::trace_product(x, y).re;
                    let expected = if a == b { 2.0 } else { 0.0 };
                    assert!((ip - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rotation_is_proper() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..10 {
            let r = rotation(&mut rng);
            assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-12);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn povm_is_valid() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let m = povm(&mut rng, 3, 6);
        assert_eq!(m.len(), 6);
    }
}
