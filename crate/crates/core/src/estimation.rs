//! Classical and quantum Fisher information, the weighted Cramér–Rao
//! minimum for qubits and the random measurement that attains it, the
//! tomography-optimal weight, rotationally symmetric weights and the
//! Gill–Massar type bound for higher dimensions.

use nalgebra::DVector;
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{
    hermitian_eig, pd_inv_sqrt, pd_inverse, psd_sqrt, trace_product, ComplexMatrix, LinalgError, RealMatrix,
};
use crate::measurement::{mub_tomography_povm, pvm_from_observable, randomize, MeasurementError, MubFamily, Povm};
use crate::state::{model_qfi, mub_derivatives, ModelDerivatives, MubModelPoint, StateError, StokesPoint};

pub type FisherMatrix = RealMatrix;
pub type Weight = RealMatrix;

/// Outcomes with probability below this are treated as impossible.
pub const ZERO_PROBABILITY: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("outcome {index} has zero probability but nonzero derivative; Fisher information undefined")]
    SingularOutcome { index: usize },
    #[error("singular or indefinite input: {0}")]
    SingularInput(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("optimal measurement construction needs a qubit, got dimension {0}")]
    UnsupportedDim(usize),
    #[error("invalid plane ({0}, {1})")]
    BadPlane(usize, usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
    #[error(transparent)]
    State(#[from] StateError),
}

fn symmetrize(a: &RealMatrix) -> RealMatrix {
    (a + a.transpose()) * 0.5
}

fn check_square(name: &str, a: &RealMatrix, d: usize) -> Result<(), EstimationError> {
    if a.nrows() != d || a.ncols() != d {
        return Err(EstimationError::DimMismatch(format!("{name} is {}x{}, expected {d}x{d}", a.nrows(), a.ncols())));
    }
    Ok(())
}

fn inv_sqrt(name: &str, a: &RealMatrix) -> Result<RealMatrix, EstimationError> {
    pd_inv_sqrt(a).map_err(|e| EstimationError::SingularInput(format!("{name}: {e}")))
}

/// Classical Fisher information `g_ij = Σ_n (Tr ∂_iρ M_n)(Tr ∂_jρ M_n) / Tr ρ M_n`.
pub fn classical_fisher(d: &ModelDerivatives, m: &Povm) -> Result<FisherMatrix, EstimationError> {
    if d.hilbert_dim() != m.dim() {
        return Err(EstimationError::DimMismatch(format!(
            "state dimension {} vs POVM dimension {}",
            d.hilbert_dim(),
            m.dim()
        )));
    }
    let k = d.n_params();
    let mut g = RealMatrix::zeros(k, k);
    let mut grad = vec![0.0; k];
    for (index, op) in m.ops().enumerate() {
        let p = trace_product(d.rho.matrix(), op).re;
        for (gi, partial) in grad.iter_mut().zip(&d.partials) {
            *gi = trace_product(partial, op).re;
        }
        if p < ZERO_PROBABILITY {
            if grad.iter().all(|v| v * v < 1e-20) {
                continue;
            }
            return Err(EstimationError::SingularOutcome { index });
        }
        for i in 0..k {
            for j in 0..k {
                g[(i, j)] += grad[i] * grad[j] / p;
            }
        }
    }
    Ok(symmetrize(&g))
}

/// `ĝ = U⁻¹ √J⁻¹ g √J⁻¹ U` for orthogonal `U`.
pub fn hat_fisher(g: &FisherMatrix, j: &FisherMatrix, u: &RealMatrix) -> Result<FisherMatrix, EstimationError> {
    let d = j.nrows();
    check_square("g", g, d)?;
    check_square("U", u, d)?;
    let s = pd_inv_sqrt(j).map_err(|e| EstimationError::SingularInput(format!("J: {e}")))?;
    Ok(symmetrize(&(u.transpose() * &s * g * &s * u)))
}

/// `Tr H g⁻¹`; fails when `g` is not positive definite.
pub fn weighted_trace_inverse(h: &Weight, g: &FisherMatrix) -> Result<f64, EstimationError> {
    check_square("H", h, g.nrows())?;
    let gi = pd_inverse(g).map_err(|e| EstimationError::SingularInput(format!("g: {e}")))?;
    Ok((h * gi).trace())
}

/// Result of the weighted Cramér–Rao minimization.
#[derive(Debug, Clone)]
pub struct OptimalSolution {
    /// `(Tr R)²` with `R = √(√J⁻¹ H √J⁻¹)`.
    pub bound: f64,
    /// `√J R √J / Tr R`, the Fisher information any minimizer must have.
    pub fisher_target: FisherMatrix,
    pub r: RealMatrix,
    /// The bound is attained by some POVM (known for qubits).
    pub attainable: bool,
    /// Attaining random measurement (set by [`optimal_measurement`]).
    pub measurement: Option<Povm>,
    /// Branch probabilities `p_i = S_i / Σ S` of the retained PVMs.
    pub probabilities: Vec<f64>,
    /// The rotated SLDs `L̂ⁱ` whose spectral PVMs form the measurement.
    pub rotated_slds: Vec<ComplexMatrix>,
}

struct RParts {
    r: RealMatrix,
    sqrt_j: RealMatrix,
    inv_sqrt_j: RealMatrix,
}

fn r_matrix(j: &FisherMatrix, h: &Weight) -> Result<RParts, EstimationError> {
    let d = j.nrows();
    check_square("H", h, d)?;
    let inv_sqrt_j = inv_sqrt("J", j)?;
    let sqrt_j = psd_sqrt(j)?;
    let hmin = hermitian_eig(h)?.min_eigenvalue();
    if hmin <= 0.0 {
        return Err(EstimationError::SingularInput(format!("H has eigenvalue {hmin:e}")));
    }
    let inner = symmetrize(&(&inv_sqrt_j * h * &inv_sqrt_j));
    let r = psd_sqrt(&inner)?;
    Ok(RParts { r, sqrt_j, inv_sqrt_j })
}

/// Minimum of `Tr H g(M)⁻¹`: `(Tr √(√J⁻¹ H √J⁻¹))²`.
///
/// The value is computed for any parameter count; `attainable` is set only
/// for `hilbert_dim == 2`.
pub fn qcr_min_trace(j: &FisherMatrix, h: &Weight, hilbert_dim: usize) -> Result<OptimalSolution, EstimationError> {
    let RParts { r, sqrt_j, .. } = r_matrix(j, h)?;
    let tr = r.trace();
    let fisher_target = symmetrize(&(&sqrt_j * &r * &sqrt_j / tr));
    Ok(OptimalSolution {
        bound: tr * tr,
        fisher_target,
        r,
        attainable: hilbert_dim == 2,
        measurement: None,
        probabilities: Vec::new(),
        rotated_slds: Vec::new(),
    })
}

/// Random measurement attaining the qubit bound.
///
/// Diagonalizes `R = U S Uᵀ`, rotates the SLDs with `K = Uᵀ √J⁻¹` and mixes
/// the spectral PVMs of `L̂ⁱ = Σ_k K^{ik} L_k` with weights `S_i / Tr S`.
/// Branches with `S_i = 0` are dropped.
pub fn optimal_measurement(
    d: &ModelDerivatives,
    j: &FisherMatrix,
    h: &Weight,
) -> Result<OptimalSolution, EstimationError> {
    if d.hilbert_dim() != 2 {
        return Err(EstimationError::UnsupportedDim(d.hilbert_dim()));
    }
    let k = d.n_params();
    if !(1..=3).contains(&k) {
        return Err(EstimationError::DimMismatch(format!("{k} parameters on a qubit")));
    }
    check_square("J", j, k)?;
    let RParts { r, sqrt_j, inv_sqrt_j } = r_matrix(j, h)?;
    let tr = r.trace();
    let eig = hermitian_eig(&r)?;
    let u = &eig.eigenvectors;
    let kmat = u.transpose() * &inv_sqrt_j;

    let total: f64 = eig.eigenvalues.iter().sum();
    let mut parts = Vec::with_capacity(k);
    let mut rotated = Vec::with_capacity(k);
    for i in 0..k {
        let mut lhat = ComplexMatrix::zeros(2, 2);
        for (kk, l) in d.slds.iter().enumerate() {
            lhat += l * Complex64::from(kmat[(i, kk)]);
        }
        let s = eig.eigenvalues[i];
        if s > 1e-14 * total {
            parts.push((s, pvm_from_observable(&lhat)?));
        }
        rotated.push(lhat);
    }
    let kept: f64 = parts.iter().map(|(s, _)| s).sum();
    for part in parts.iter_mut() {
        part.0 /= kept;
    }
    let probabilities = parts.iter().map(|(p, _)| *p).collect();
    let measurement = randomize(&parts)?;
    Ok(OptimalSolution {
        bound: tr * tr,
        fisher_target: symmetrize(&(&sqrt_j * &r * &sqrt_j / tr)),
        r,
        attainable: true,
        measurement: Some(measurement),
        probabilities,
        rotated_slds: rotated,
    })
}

/// Locally unbiased estimator `θ̂(n) = θ + g⁻¹ ∇ log Tr ρ_θ M_n`, one value per outcome.
pub fn lu_estimator(
    theta: &[f64],
    d: &ModelDerivatives,
    m: &Povm,
    g: &FisherMatrix,
) -> Result<Vec<DVector<f64>>, EstimationError> {
    let k = d.n_params();
    if theta.len() != k {
        return Err(EstimationError::DimMismatch(format!("{} coordinates for {k} parameters", theta.len())));
    }
    check_square("g", g, k)?;
    let gi = pd_inverse(g).map_err(|e| EstimationError::SingularInput(format!("g: {e}")))?;
    let base = DVector::from_column_slice(theta);
    m.ops()
        .enumerate()
        .map(|(index, op)| {
            let p = trace_product(d.rho.matrix(), op).re;
            if p <= ZERO_PROBABILITY {
                return Err(EstimationError::SingularOutcome { index });
            }
            let score = DVector::from_iterator(k, d.partials.iter().map(|dp| trace_product(dp, op).re / p));
            Ok(&base + &gi * score)
        })
        .collect()
}

/// Closed-form `g_x(M^(T)) = diag(1 / (1 − (x^μ)²)) / 3`.
pub fn tomography_fisher(x: &StokesPoint) -> FisherMatrix {
    let c = x.coords();
    RealMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 / (3.0 * (1.0 - c[i] * c[i])) } else { 0.0 })
}

/// The weight for which qubit tomography is optimal.
pub fn tomography_weight(x: &StokesPoint) -> Weight {
    let c = x.coords();
    let a: Vec<f64> = c.iter().map(|v| 1.0 - v * v).collect();
    RealMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 / a[i] } else { -c[i] * c[j] / (a[i] * a[j]) })
}

/// Output of [`weight_from_fisher`].
#[derive(Debug, Clone)]
pub struct FisherWeight {
    /// `k F J⁻¹ F`, symmetrized.
    pub weight: Weight,
    /// `Tr J⁻¹ F`.
    pub trace: f64,
    /// `|Tr J⁻¹ F − 1| ≤ 1e-9`: `F` is the optimal Fisher information of `weight`.
    pub feasible: bool,
}

/// The unique (up to scale) weight whose optimal Fisher information is `f`.
pub fn weight_from_fisher(f: &FisherMatrix, j: &FisherMatrix, k: f64) -> Result<FisherWeight, EstimationError> {
    check_square("F", f, j.nrows())?;
    if !(k > 0.0) {
        return Err(EstimationError::SingularInput(format!("scale {k}")));
    }
    let ji = pd_inverse(j).map_err(|e| EstimationError::SingularInput(format!("J: {e}")))?;
    let fmin = hermitian_eig(f)?.min_eigenvalue();
    if fmin <= 0.0 {
        return Err(EstimationError::SingularInput(format!("F has eigenvalue {fmin:e}")));
    }
    let trace = (&ji * f).trace();
    Ok(FisherWeight { weight: symmetrize(&(f * &ji * f * k)), trace, feasible: (trace - 1.0).abs() <= 1e-9 })
}

/// Rotationally symmetric weight `H = f(r) I + (g(r) − f(r)) |x⟩⟨x| / r²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RotWeight {
    /// `f = g = 1`.
    Identity,
    /// `f = 1`, `g = 1 / (1 − r²)`: the SLD Fisher information.
    Qfi,
    /// Constant profiles.
    Constant { f: f64, g: f64 },
}

impl RotWeight {
    pub fn fg(&self, r: f64) -> (f64, f64) {
        match *self {
            RotWeight::Identity => (1.0, 1.0),
            RotWeight::Qfi => (1.0, 1.0 / (1.0 - r * r)),
            // At the origin there is no radial direction and H = f I.
            RotWeight::Constant { f, .. } if r == 0.0 => (f, f),
            RotWeight::Constant { f, g } => (f, g),
        }
    }
}

pub fn rot_weight(spec: RotWeight, x: &StokesPoint) -> Weight {
    let v = x.vector();
    let r = v.norm();
    let (f, g) = spec.fg(r);
    let mut h = RealMatrix::identity(3, 3) * f;
    if r > 0.0 {
        let outer = v * v.transpose() * ((g - f) / (r * r));
        for i in 0..3 {
            for j in 0..3 {
                h[(i, j)] += outer[(i, j)];
            }
        }
    }
    h
}

/// `(2√f + √((1 − r²) g))²`.
pub fn c_opt_closed(spec: RotWeight, r: f64) -> f64 {
    let (f, g) = spec.fg(r);
    let s = 2.0 * f.sqrt() + ((1.0 - r * r) * g).sqrt();
    s * s
}

/// Anisotropy `t = 1 − Σ (x^μ)⁴ / r⁴`, zero at the origin.
pub fn anisotropy(x: &StokesPoint) -> f64 {
    let r2 = x.vector().norm_squared();
    if r2 == 0.0 {
        return 0.0;
    }
    1.0 - x.coords().iter().map(|v| v.powi(4)).sum::<f64>() / (r2 * r2)
}

/// `3 (2f + (1 − r²) g) + 3 t r² (g − f)`.
pub fn c_tomo_closed(spec: RotWeight, x: &StokesPoint) -> f64 {
    let r = x.radius();
    let (f, g) = spec.fg(r);
    let t = anisotropy(x);
    3.0 * (2.0 * f + (1.0 - r * r) * g) + 3.0 * t * r * r * (g - f)
}

/// `c^(T) − c`, never negative.
pub fn tomo_excess(spec: RotWeight, x: &StokesPoint) -> f64 {
    c_tomo_closed(spec, x) - c_opt_closed(spec, x.radius())
}

/// The two factored forms of the excess; each equals [`tomo_excess`].
pub fn tomo_excess_forms(spec: RotWeight, x: &StokesPoint) -> (f64, f64) {
    let r = x.radius();
    let (f, g) = spec.fg(r);
    let t = anisotropy(x);
    let w = 1.0 - r * r;
    let first = 2.0 * ((w * g).sqrt() - f.sqrt()).powi(2) + 3.0 * r * r * (g - f) * t;
    let second = 2.0 * ((w * f).sqrt() - g.sqrt()).powi(2) + 3.0 * r * r * (f - g) * (2.0 / 3.0 - t);
    (first, second)
}

/// `(Tr √(√J⁻¹ H √J⁻¹))² / (q − 1)`: a lower bound on `Tr H g(M)⁻¹` over all
/// POVMs on a `q`-dimensional space. Not claimed to be attained for `q ≥ 3`.
pub fn gm_lower_bound(j: &FisherMatrix, h: &Weight, q: usize) -> Result<f64, EstimationError> {
    if q < 2 {
        return Err(EstimationError::UnsupportedDim(q));
    }
    let RParts { r, .. } = r_matrix(j, h)?;
    let tr = r.trace();
    Ok(tr * tr / (q - 1) as f64)
}

/// Points `v(φ) = u(φ) / √(uᵀ H u)` on the indicatrix `vᵀ H v = 1`, with
/// `u(φ)` sweeping the unit circle of the coordinate plane `(a, b)`
/// (0-based indices).
pub fn indicatrix_points(h: &Weight, plane: (usize, usize), n: usize) -> Result<Vec<[f64; 2]>, EstimationError> {
    let (a, b) = plane;
    let d = h.nrows();
    if a == b || a >= d || b >= d {
        return Err(EstimationError::BadPlane(a, b));
    }
    (0..n)
        .map(|k| {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let (s, c) = phi.sin_cos();
            let q = c * c * h[(a, a)] + s * s * h[(b, b)] + c * s * (h[(a, b)] + h[(b, a)]);
            if !(q > 0.0) {
                return Err(EstimationError::SingularInput(format!("uᵀHu = {q:e}")));
            }
            let scale = 1.0 / q.sqrt();
            Ok([c * scale, s * scale])
        })
        .collect()
}

/// Numerical minimizer of `Tr S G⁻¹` over `{G > 0, Tr G = 1}`.
#[derive(Debug, Clone)]
pub struct LagrangeOutcome {
    pub value: f64,
    pub minimizer: RealMatrix,
    pub iterations: usize,
}

/// Projected gradient descent with backtracking on the unit-trace slice.
///
/// Independent of the closed-form `(Tr √S)²`, so it can serve as an oracle.
pub fn lagrange_min_numeric(s: &RealMatrix, max_iter: usize) -> Result<LagrangeOutcome, EstimationError> {
    let d = s.nrows();
    let objective = |g: &RealMatrix| -> Option<f64> {
        let chol = g.clone().cholesky()?;
        Some((s * chol.inverse()).trace())
    };
    let mut g = RealMatrix::identity(d, d) / d as f64;
    let mut value = objective(&g).ok_or_else(|| EstimationError::SingularInput("start".into()))?;
    let mut step = 1.0 / value.abs().max(1.0);
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let gi = g
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| EstimationError::SingularInput("iterate left the cone".into()))?;
        let grad = -(&gi * s * &gi);
        let mut dir = symmetrize(&grad);
        let shift = dir.trace() / d as f64;
        for i in 0..d {
            dir[(i, i)] -= shift;
        }
        let dnorm2 = dir.norm_squared();
        if dnorm2.sqrt() < 1e-13 * value.abs().max(1.0) {
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &g - &dir * step;
            if let Some(v) = objective(&cand) {
                if v <= value - 1e-4 * step * dnorm2 {
                    g = cand;
                    value = v;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step *= 2.0;
    }
    Ok(LagrangeOutcome { value, minimizer: g, iterations })
}

/// One point of the higher-dimensional comparison along a coordinate direction.
#[derive(Debug, Clone, Copy)]
pub struct MubBoundRow {
    pub r: f64,
    /// Lower bound `(q² − 1)² / (q − 1)` for the weight `H = J`.
    pub c_gm: f64,
    /// `Tr J g(M^(T))⁻¹` of the MUB tomography.
    pub c_tomo: f64,
}

/// Evaluates `cGM` and `c^(T)` at `r · dir` in the affine MUB model with `H = J`.
pub fn mub_bounds_at(family: &MubFamily, dir: &[f64], r: f64) -> Result<MubBoundRow, EstimationError> {
    let q = family.q();
    let point = MubModelPoint { q, coords: dir.iter().map(|v| v * r).collect(), bases_ref: family.name().to_string() };
    let d = mub_derivatives(&point, family)?;
    let j = model_qfi(&d);
    let g = classical_fisher(&d, &mub_tomography_povm(family))?;
    Ok(MubBoundRow { r, c_gm: gm_lower_bound(&j, &j, q)?, c_tomo: weighted_trace_inverse(&j, &g)? })
}
