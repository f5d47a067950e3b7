//! Parametric state models: the qubit Stokes model with closed-form SLDs,
//! the affine model over a full set of mutually unbiased bases, and the
//! Bures distance.

use nalgebra::{DVector, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    hermitian_deviation, hermitian_eig, hermitian_part, psd_sqrt, solve_sld, trace_product, ComplexMatrix, LinalgError,
    RealMatrix,
};
use crate::measurement::MubFamily;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("Stokes vector has norm {radius} >= 1")]
    OutOfBall { radius: f64 },
    #[error("model point is not strictly positive (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("not a density matrix: {0}")]
    NotState(String),
    #[error("expected {expected} coordinates, got {got}")]
    CoordinateCount { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Pauli matrices σ₁, σ₂, σ₃.
pub fn pauli() -> [ComplexMatrix; 3] {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    [
        ComplexMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        ComplexMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        ComplexMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
    ]
}

/// A point in the open Bloch ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct StokesPoint([f64; 3]);

impl StokesPoint {
    pub fn new(x: [f64; 3]) -> Result<Self, StateError> {
        let radius = Vector3::from(x).norm();
        if !(radius < 1.0) {
            return Err(StateError::OutOfBall { radius });
        }
        Ok(Self(x))
    }

    pub fn origin() -> Self {
        Self([0.0; 3])
    }

    pub fn coords(&self) -> [f64; 3] {
        self.0
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::from(self.0)
    }

    pub fn radius(&self) -> f64 {
        self.vector().norm()
    }
}

impl TryFrom<[f64; 3]> for StokesPoint {
    type Error = StateError;
    fn try_from(x: [f64; 3]) -> Result<Self, Self::Error> {
        Self::new(x)
    }
}

impl From<StokesPoint> for [f64; 3] {
    fn from(p: StokesPoint) -> Self {
        p.0
    }
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity (tolerances 1e-9).
    pub fn new(m: ComplexMatrix) -> Result<Self, StateError> {
        if !m.is_square() {
            return Err(StateError::NotState("not square".into()));
        }
        if hermitian_deviation(&m) > 1e-9 {
            return Err(StateError::NotState("not Hermitian".into()));
        }
        let tr = m.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > 1e-9 {
            return Err(StateError::NotState(format!("trace {tr}")));
        }
        let eig = hermitian_eig(&m)?;
        if eig.min_eigenvalue() < -1e-9 {
            return Err(StateError::NotState(format!("negative eigenvalue {:e}", eig.min_eigenvalue())));
        }
        Ok(Self(hermitian_part(&m)))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        // Validated at construction, so the decomposition cannot fail.
        hermitian_eig(&self.0).map(|e| e.eigenvalues).unwrap_or_else(|_| DVector::zeros(self.dim()))
    }
}

/// τ_x = (I + Σ x^μ σ_μ) / 2.
pub fn qubit_state(x: &StokesPoint) -> DensityMatrix {
    let [s1, s2, s3] = pauli();
    let [a, b, c] = x.coords();
    let m =
        (ComplexMatrix::identity(2, 2) + s1 * Complex64::from(a) + s2 * Complex64::from(b) + s3 * Complex64::from(c))
            * Complex64::from(0.5);
    DensityMatrix(m)
}

/// State, partial derivatives and SLDs of a model at one parameter value.
#[derive(Debug, Clone)]
pub struct ModelDerivatives {
    pub rho: DensityMatrix,
    pub partials: Vec<ComplexMatrix>,
    pub slds: Vec<ComplexMatrix>,
}

impl ModelDerivatives {
    /// Solves the SLD equation numerically for every partial.
    pub fn from_partials(rho: DensityMatrix, partials: Vec<ComplexMatrix>) -> Result<Self, StateError> {
        let slds = partials.iter().map(|d| solve_sld(rho.matrix(), d)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { rho, partials, slds })
    }

    pub fn n_params(&self) -> usize {
        self.partials.len()
    }

    pub fn hilbert_dim(&self) -> usize {
        self.rho.dim()
    }

    /// Keeps only the listed parameters (a submodel).
    pub fn restrict(&self, indices: &[usize]) -> Self {
        Self {
            rho: self.rho.clone(),
            partials: indices.iter().map(|&i| self.partials[i].clone()).collect(),
            slds: indices.iter().map(|&i| self.slds[i].clone()).collect(),
        }
    }

    /// Largest residual of `∂ρ = (Lρ + ρL)/2` over all parameters.
    pub fn sld_residual(&self) -> f64 {
        let rho = self.rho.matrix();
        self.partials
            .iter()
            .zip(&self.slds)
            .map(|(d, l)| {
                let lhs = (l * rho + rho * l) * Complex64::from(0.5);
                (lhs - d).iter().map(|z| z.norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// Closed-form SLDs of the Stokes model, `L_μ = σ_μ − x^μ (I − τ) / (2 det τ)`.
pub fn qubit_slds(x: &StokesPoint) -> ModelDerivatives {
    let rho = qubit_state(x);
    let r2 = x.vector().norm_squared();
    let det = (1.0 - r2) / 4.0;
    let comp = ComplexMatrix::identity(2, 2) - rho.matrix();
    let paulis = pauli();
    let partials = paulis.iter().map(|s| s * Complex64::from(0.5)).collect();
    let slds = paulis.iter().zip(x.coords()).map(|(s, xm)| s - &comp * Complex64::from(xm / (2.0 * det))).collect();
    ModelDerivatives { rho, partials, slds }
}

/// SLD Fisher information of the Stokes model, `J = I + |x⟩⟨x| / (1 − r²)`.
pub fn qubit_qfi(x: &StokesPoint) -> RealMatrix {
    let v = x.vector();
    let r2 = v.norm_squared();
    let outer = v * v.transpose() / (1.0 - r2);
    RealMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.0 } + outer[(i, j)])
}

/// `J_ij = Re Tr(∂_i ρ L_j)`, symmetrized.
pub fn model_qfi(d: &ModelDerivatives) -> RealMatrix {
    let n = d.n_params();
    let raw = RealMatrix::from_fn(n, n, |i, j| trace_product(&d.partials[i], &d.slds[j]).re);
    (&raw + raw.transpose()) * 0.5
}

/// Coordinates `x_{α,i}` of the affine MUB model, α in 1..=q+1, i in 1..=q−1,
/// stored α-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MubModelPoint {
    pub q: usize,
    pub coords: Vec<f64>,
    pub bases_ref: String,
}

impl MubModelPoint {
    pub fn n_params(q: usize) -> usize {
        (q + 1) * (q - 1)
    }

    pub fn index(q: usize, alpha: usize, i: usize) -> usize {
        (alpha - 1) * (q - 1) + (i - 1)
    }

    pub fn origin(q: usize, bases_ref: impl Into<String>) -> Self {
        Self { q, coords: vec![0.0; Self::n_params(q)], bases_ref: bases_ref.into() }
    }
}

/// The affine-model partial `|e_i^(α)⟩⟨e_i^(α)| − I/q` for every coordinate.
pub fn mub_partials(family: &MubFamily) -> Vec<ComplexMatrix> {
    let q = family.q();
    let shift = ComplexMatrix::identity(q, q) * Complex64::from(1.0 / q as f64);
    let mut out = Vec::with_capacity(MubModelPoint::n_params(q));
    for alpha in 0..=q {
        for i in 0..(q - 1) {
            out.push(family.projector(alpha, i) - &shift);
        }
    }
    out
}

/// τ_x = I/q + Σ x_{α,i} (|e_i^(α)⟩⟨e_i^(α)| − I/q), required strictly positive.
pub fn mub_state(p: &MubModelPoint, family: &MubFamily) -> Result<DensityMatrix, StateError> {
    let q = family.q();
    let expected = MubModelPoint::n_params(q);
    if p.q != q || p.coords.len() != expected {
        return Err(StateError::CoordinateCount { expected, got: p.coords.len() });
    }
    let mut m = ComplexMatrix::identity(q, q) * Complex64::from(1.0 / q as f64);
    for (x, d) in p.coords.iter().zip(mub_partials(family)) {
        m += d * Complex64::from(*x);
    }
    let m = hermitian_part(&m);
    let min = hermitian_eig(&m)?.min_eigenvalue();
    if min <= 0.0 {
        return Err(StateError::NotPositive { min_eigenvalue: min });
    }
    Ok(DensityMatrix(m))
}

/// State, affine partials and numerically solved SLDs of the MUB model.
pub fn mub_derivatives(p: &MubModelPoint, family: &MubFamily) -> Result<ModelDerivatives, StateError> {
    let rho = mub_state(p, family)?;
    ModelDerivatives::from_partials(rho, mub_partials(family))
}

/// Bures distance in the convention `B(ρ, σ) = 4 (1 − Tr √(√ρ σ √ρ))`.
pub fn bures_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64, StateError> {
    if rho.dim() != sigma.dim() {
        return Err(StateError::NotState(format!("dimensions {} and {}", rho.dim(), sigma.dim())));
    }
    let root = psd_sqrt(rho.matrix())?;
    let inner = hermitian_part(&(&root * sigma.matrix() * &root));
    let eig = hermitian_eig(&inner)?;
    if eig.min_eigenvalue() < -1e-12 {
        return Err(StateError::NotState(format!("negative eigenvalue {:e}", eig.min_eigenvalue())));
    }
    let fidelity_root: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok((4.0 * (1.0 - fidelity_root)).max(0.0))
}
