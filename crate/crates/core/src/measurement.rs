//! POVMs: spectral PVMs, randomized combinations, the qubit tomography
//! measurement and full sets of mutually unbiased bases.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{hermitian_eig, trace_product, ComplexMatrix, LinalgError};
use crate::state::{pauli, DensityMatrix};

/// Completeness tolerance, `max |Σ M_n − I|`.
pub const COMPLETENESS_TOL: f64 = 1e-9;
/// Positivity tolerance for each element's smallest eigenvalue.
pub const POSITIVITY_TOL: f64 = 1e-10;
/// Eigenvalues closer than this are merged into one projector.
pub const CLUSTER_GAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasurementError {
    #[error("POVM elements do not sum to the identity (deviation {deviation:e})")]
    NotComplete { deviation: f64 },
    #[error("POVM element {index} is not positive (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { index: usize, min_eigenvalue: f64 },
    #[error("probabilities must be nonnegative and sum to one: {0}")]
    BadDistribution(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("no mutually unbiased bases available for dimension {0} (supported: 2, 3, 4, 5)")]
    UnsupportedDimension(usize),
    #[error("invalid MUB family: {0}")]
    InvalidFamily(String),
    #[error("invalid POVM data: {0}")]
    Parse(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Which branch of a random measurement an element came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub branch: usize,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PovmElement {
    pub label: String,
    pub op: ComplexMatrix,
    pub provenance: Option<Provenance>,
}

/// Finite-outcome POVM; completeness and positivity are checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    dim: usize,
    elements: Vec<PovmElement>,
}

impl Povm {
    pub fn new(dim: usize, elements: Vec<PovmElement>) -> Result<Self, MeasurementError> {
        let mut sum = ComplexMatrix::zeros(dim, dim);
        for (index, e) in elements.iter().enumerate() {
            if e.op.nrows() != dim || e.op.ncols() != dim {
                return Err(MeasurementError::DimMismatch { left: dim, right: e.op.nrows() });
            }
            let min = hermitian_eig(&e.op)?.min_eigenvalue();
            if min < -POSITIVITY_TOL {
                return Err(MeasurementError::NotPositive { index, min_eigenvalue: min });
            }
            sum += &e.op;
        }
        let deviation = (sum - ComplexMatrix::identity(dim, dim)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if deviation > COMPLETENESS_TOL {
            return Err(MeasurementError::NotComplete { deviation });
        }
        Ok(Self { dim, elements })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[PovmElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn ops(&self) -> impl Iterator<Item = &ComplexMatrix> {
        self.elements.iter().map(|e| &e.op)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.elements.iter().map(|e| e.label.as_str()).collect()
    }

    pub fn to_json(&self) -> PovmJson {
        PovmJson {
            dim: self.dim,
            elements: self
                .elements
                .iter()
                .map(|e| PovmElementJson {
                    label: e.label.clone(),
                    entries: matrix_to_pairs(&e.op),
                    provenance: e.provenance,
                })
                .collect(),
        }
    }

    pub fn from_json(j: &PovmJson) -> Result<Self, MeasurementError> {
        let elements = j
            .elements
            .iter()
            .map(|e| {
                Ok(PovmElement {
                    label: e.label.clone(),
                    op: matrix_from_pairs(j.dim, &e.entries)?,
                    provenance: e.provenance,
                })
            })
            .collect::<Result<Vec<_>, MeasurementError>>()?;
        Self::new(j.dim, elements)
    }
}

/// Serialized POVM: row-major entries as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PovmJson {
    pub dim: usize,
    pub elements: Vec<PovmElementJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PovmElementJson {
    pub label: String,
    pub entries: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

pub fn matrix_to_pairs(m: &ComplexMatrix) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

pub fn matrix_from_pairs(dim: usize, entries: &[[f64; 2]]) -> Result<ComplexMatrix, MeasurementError> {
    if entries.len() != dim * dim {
        return Err(MeasurementError::Parse(format!("expected {} entries, found {}", dim * dim, entries.len())));
    }
    Ok(ComplexMatrix::from_row_iterator(dim, dim, entries.iter().map(|[re, im]| Complex64::new(*re, *im))))
}

fn format_eigenvalue(v: f64) -> String {
    let rounded = (v * 1e9).round() / 1e9;
    if rounded.fract() == 0.0 {
        format!("{:+}", rounded as i64)
    } else {
        let s = format!("{rounded:+.9}");
        s.trim_end_matches('0').to_string()
    }
}

/// Spectral PVM: one projector per eigenvalue cluster, labeled by the eigenvalue,
/// in ascending eigenvalue order.
pub fn pvm_from_observable(a: &ComplexMatrix) -> Result<Povm, MeasurementError> {
    let eig = hermitian_eig(a)?;
    let n = a.nrows();
    let lambda = &eig.eigenvalues;
    let v = &eig.eigenvectors;
    let scale = lambda.iter().fold(1.0f64, |m, l| m.max(l.abs()));

    let mut elements = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && lambda[end] - lambda[end - 1] < CLUSTER_GAP * scale {
            end += 1;
        }
        let cols = v.columns(start, end - start);
        let projector = &cols * cols.adjoint();
        let mean = lambda.rows(start, end - start).mean();
        elements.push(PovmElement { label: format_eigenvalue(mean), op: projector, provenance: None });
        start = end;
    }
    Povm::new(n, elements)
}

/// Randomized combination `⊕ p_i M^(i)`: concatenates `p_i M^(i)_j` with provenance `(i, p_i)`.
pub fn randomize(parts: &[(f64, Povm)]) -> Result<Povm, MeasurementError> {
    let Some((_, first)) = parts.first() else {
        return Err(MeasurementError::BadDistribution("empty combination".into()));
    };
    let dim = first.dim();
    let total: f64 = parts.iter().map(|(p, _)| p).sum();
    if parts.iter().any(|(p, _)| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(MeasurementError::BadDistribution(format!("total {total}")));
    }
    let mut elements = Vec::new();
    for (branch, (p, m)) in parts.iter().enumerate() {
        if m.dim() != dim {
            return Err(MeasurementError::DimMismatch { left: dim, right: m.dim() });
        }
        for e in m.elements() {
            elements.push(PovmElement {
                label: e.label.clone(),
                op: &e.op * Complex64::from(*p),
                provenance: Some(Provenance { branch, probability: *p }),
            });
        }
    }
    Povm::new(dim, elements)
}

/// `M^(T) = (M^(1) ⊕ M^(2) ⊕ M^(3)) / 3` with outcomes ordered
/// `(1+, 1−, 2+, 2−, 3+, 3−)`.
pub fn qubit_tomography_povm() -> Povm {
    let third = 1.0 / 3.0;
    let parts: Vec<(f64, Povm)> = pauli()
        .iter()
        .enumerate()
        .map(|(mu, s)| {
            let pvm = pvm_from_observable(s).expect("Pauli matrices are Hermitian");
            let elements = pvm
                .elements()
                .iter()
                .rev()
                .map(|e| PovmElement {
                    label: format!("{}{}", mu + 1, if e.label.starts_with('+') { '+' } else { '-' }),
                    ..e.clone()
                })
                .collect();
            (third, Povm { dim: 2, elements })
        })
        .collect();
    randomize(&parts).expect("uniform mixture of PVMs is a POVM")
}

/// Full set of `q + 1` mutually unbiased bases; basis α is a unitary whose
/// columns are the vectors `|e_i^(α)⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct MubFamily {
    q: usize,
    bases: Vec<ComplexMatrix>,
}

impl MubFamily {
    /// Known construction for `q ∈ {2, 3, 4, 5}`.
    pub fn new(q: usize) -> Result<Self, MeasurementError> {
        mub_bases(q)
    }

    pub fn from_bases(q: usize, bases: Vec<ComplexMatrix>) -> Result<Self, MeasurementError> {
        let fam = Self { q, bases };
        fam.validate()?;
        Ok(fam)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn bases(&self) -> &[ComplexMatrix] {
        &self.bases
    }

    /// Identifier of the construction used.
    pub fn name(&self) -> &'static str {
        match self.q {
            2 => "pauli",
            4 => "gf4",
            _ => "quadratic-phase",
        }
    }

    pub fn vector(&self, alpha: usize, i: usize) -> DVector<Complex64> {
        self.bases[alpha].column(i).into_owned()
    }

    pub fn projector(&self, alpha: usize, i: usize) -> ComplexMatrix {
        let v = self.vector(alpha, i);
        &v * v.adjoint()
    }

    /// Largest deviation from orthonormality within a basis and from `1/q`
    /// across bases.
    pub fn overlap_errors(&self) -> (f64, f64) {
        let q = self.q;
        let mut ortho = 0.0f64;
        let mut unbiased = 0.0f64;
        for (a, ba) in self.bases.iter().enumerate() {
            for (b, bb) in self.bases.iter().enumerate() {
                let g = ba.adjoint() * bb;
                for i in 0..q {
                    for j in 0..q {
                        let o = g[(i, j)].norm_sqr();
                        if a == b {
                            let target = if i == j { 1.0 } else { 0.0 };
                            ortho = ortho.max((g[(i, j)] - Complex64::from(target)).norm());
                        } else {
                            unbiased = unbiased.max((o - 1.0 / q as f64).abs());
                        }
                    }
                }
            }
        }
        (ortho, unbiased)
    }

    pub fn validate(&self) -> Result<(), MeasurementError> {
        if self.bases.len() != self.q + 1 {
            return Err(MeasurementError::InvalidFamily(format!(
                "expected {} bases, found {}",
                self.q + 1,
                self.bases.len()
            )));
        }
        if self.bases.iter().any(|b| b.nrows() != self.q || b.ncols() != self.q) {
            return Err(MeasurementError::InvalidFamily("basis shape".into()));
        }
        let (ortho, unbiased) = self.overlap_errors();
        if ortho > 1e-10 {
            return Err(MeasurementError::InvalidFamily(format!("orthonormality error {ortho:e}")));
        }
        if unbiased > 1e-9 {
            return Err(MeasurementError::InvalidFamily(format!("overlap error {unbiased:e}")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> MubJson {
        let (ortho, unbiased) = self.overlap_errors();
        MubJson {
            q: self.q,
            construction: self.name().to_string(),
            bases: self
                .bases
                .iter()
                .map(|b| (0..self.q).map(|i| b.column(i).iter().map(|z| [z.re, z.im]).collect()).collect())
                .collect(),
            max_orthonormality_error: ortho,
            max_overlap_error: unbiased,
        }
    }
}

/// Serialized MUB family: `bases[α][i]` is the vector `|e_i^(α)⟩` as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MubJson {
    pub q: usize,
    pub construction: String,
    pub bases: Vec<Vec<Vec<[f64; 2]>>>,
    pub max_orthonormality_error: f64,
    pub max_overlap_error: f64,
}

/// Builds a full set of MUBs for `q ∈ {2, 3, 4, 5}`.
///
/// q = 2 uses the eigenbases of σ₃, σ₁, σ₂; odd primes use the computational
/// basis plus the quadratic-phase bases `ω^{a k² + j k} / √q`; q = 4 is the
/// tabulated GF(4) set.
pub fn mub_bases(q: usize) -> Result<MubFamily, MeasurementError> {
    let bases = match q {
        2 => qubit_bases(),
        3 | 5 => odd_prime_bases(q),
        4 => gf4_bases(),
        _ => return Err(MeasurementError::UnsupportedDimension(q)),
    };
    MubFamily::from_bases(q, bases)
}

fn qubit_bases() -> Vec<ComplexMatrix> {
    let [s1, s2, s3] = pauli();
    [s3, s1, s2]
        .iter()
        .map(|s| {
            // Columns ordered +1 then −1.
            let eig = hermitian_eig(s).expect("Pauli matrices are Hermitian");
            let v = eig.eigenvectors;
            ComplexMatrix::from_columns(&[v.column(1), v.column(0)])
        })
        .collect()
}

fn odd_prime_bases(q: usize) -> Vec<ComplexMatrix> {
    let norm = 1.0 / (q as f64).sqrt();
    let mut out = vec![ComplexMatrix::identity(q, q)];
    for a in 0..q {
        out.push(ComplexMatrix::from_fn(q, q, |k, j| {
            let phase = 2.0 * PI * ((a * k * k + j * k) % q) as f64 / q as f64;
            Complex64::from_polar(norm, phase)
        }));
    }
    out
}

fn gf4_bases() -> Vec<ComplexMatrix> {
    const ROWS: [[[i8; 2]; 4]; 16] = [
        [[1, 0], [1, 0], [1, 0], [1, 0]],
        [[1, 0], [1, 0], [-1, 0], [-1, 0]],
        [[1, 0], [-1, 0], [-1, 0], [1, 0]],
        [[1, 0], [-1, 0], [1, 0], [-1, 0]],
        [[1, 0], [-1, 0], [0, -1], [0, -1]],
        [[1, 0], [-1, 0], [0, 1], [0, 1]],
        [[1, 0], [1, 0], [0, 1], [0, -1]],
        [[1, 0], [1, 0], [0, -1], [0, 1]],
        [[1, 0], [0, -1], [0, -1], [-1, 0]],
        [[1, 0], [0, -1], [0, 1], [1, 0]],
        [[1, 0], [0, 1], [0, 1], [-1, 0]],
        [[1, 0], [0, 1], [0, -1], [1, 0]],
        [[1, 0], [0, -1], [-1, 0], [0, -1]],
        [[1, 0], [0, -1], [1, 0], [0, 1]],
        [[1, 0], [0, 1], [-1, 0], [0, 1]],
        [[1, 0], [0, 1], [1, 0], [0, -1]],
    ];
    let mut out = vec![ComplexMatrix::identity(4, 4)];
    for b in 0..4 {
        let m = ComplexMatrix::from_fn(4, 4, |k, i| {
            let [re, im] = ROWS[4 * b + i][k];
            Complex64::new(f64::from(re) / 2.0, f64::from(im) / 2.0)
        });
        out.push(m);
    }
    out
}

/// `M^(T) = ⊕_α M^(α) / (q + 1)`, elements labeled `"α:i"` (1-based).
pub fn mub_tomography_povm(family: &MubFamily) -> Povm {
    let q = family.q();
    let p = 1.0 / (q + 1) as f64;
    let parts: Vec<(f64, Povm)> = (0..=q)
        .map(|alpha| {
            let elements = (0..q)
                .map(|i| PovmElement {
                    label: format!("{}:{}", alpha + 1, i + 1),
                    op: family.projector(alpha, i),
                    provenance: None,
                })
                .collect();
            (p, Povm { dim: q, elements })
        })
        .collect();
    randomize(&parts).expect("uniform mixture of MUB PVMs is a POVM")
}

/// `p_n = Tr ρ M_n`, clamped to `[0, 1]`.
pub fn outcome_distribution(rho: &DensityMatrix, m: &Povm) -> Result<Vec<f64>, MeasurementError> {
    if rho.dim() != m.dim() {
        return Err(MeasurementError::DimMismatch { left: rho.dim(), right: m.dim() });
    }
    Ok(m.ops().map(|op| trace_product(rho.matrix(), op).re.clamp(0.0, 1.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{qubit_state, StokesPoint};
    use approx::assert_abs_diff_eq;

    fn close(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        (a - b).norm()
    }

    #[test]
    fn pvm_sigma3() {
        let [_, _, s3] = pauli();
        let pvm = pvm_from_observable(&s3).unwrap();
        assert_eq!(pvm.labels(), vec!["-1", "+1"]);
        let id = ComplexMatrix::identity(2, 2);
        let half = Complex64::from(0.5);
        assert!(close(&pvm.elements()[1].op, &((&id + &s3) * half)) < 1e-14);
        assert!(close(&pvm.elements()[0].op, &((&id - &s3) * half)) < 1e-14);
    }

    #[test]
    fn pvm_sigma1_and_identity() {
        let [s1, _, _] = pauli();
        let pvm = pvm_from_observable(&s1).unwrap();
        let id = ComplexMatrix::identity(2, 2);
        let half = Complex64::from(0.5);
        assert!(close(&pvm.elements()[1].op, &((&id + &s1) * half)) < 1e-14);
        let single = pvm_from_observable(&id).unwrap();
        assert_eq!(single.len(), 1);
        assert!(close(&single.elements()[0].op, &id) < 1e-14);
    }

    #[test]
    fn eigenvalue_labels() {
        assert_eq!(format_eigenvalue(1.0), "+1");
        assert_eq!(format_eigenvalue(-0.25), "-0.25");
        assert_eq!(format_eigenvalue(2.0 + 1e-13), "+2");
    }

    #[test]
    fn randomize_single_unchanged() {
        let [s1, _, _] = pauli();
        let pvm = pvm_from_observable(&s1).unwrap();
        let r = randomize(&[(1.0, pvm.clone())]).unwrap();
        for (a, b) in r.elements().iter().zip(pvm.elements()) {
            assert!(close(&a.op, &b.op) < 1e-15);
            assert_eq!(a.label, b.label);
        }
    }

    #[test]
    fn randomize_rejects_bad_weights() {
        let pvm = pvm_from_observable(&pauli()[0]).unwrap();
        assert!(matches!(
            randomize(&[(0.6, pvm.clone()), (0.6, pvm.clone())]),
            Err(MeasurementError::BadDistribution(_))
        ));
        assert!(randomize(&[(-0.5, pvm.clone()), (1.5, pvm)]).is_err());
        let q3 = mub_tomography_povm(&MubFamily::new(3).unwrap());
        let q2 = qubit_tomography_povm();
        assert!(matches!(randomize(&[(0.5, q2), (0.5, q3)]), Err(MeasurementError::DimMismatch { .. })));
    }

    #[test]
    fn tomography_povm_shape() {
        let t = qubit_tomography_povm();
        assert_eq!(t.len(), 6);
        assert_eq!(t.labels(), vec!["1+", "1-", "2+", "2-", "3+", "3-"]);
        for e in t.elements() {
            assert_abs_diff_eq!(e.op.trace().re, 1.0 / 3.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn tomography_distribution_at_x0() {
        let x = StokesPoint::new([0.55; 3]).unwrap();
        let p = outcome_distribution(&qubit_state(&x), &qubit_tomography_povm()).unwrap();
        for mu in 0..3 {
            assert_abs_diff_eq!(p[2 * mu], 1.55 / 6.0, epsilon = 1e-14);
            assert_abs_diff_eq!(p[2 * mu + 1], 0.45 / 6.0, epsilon = 1e-14);
        }
        let p = outcome_distribution(&qubit_state(&StokesPoint::origin()), &qubit_tomography_povm()).unwrap();
        for pn in p {
            assert_abs_diff_eq!(pn, 1.0 / 6.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn deterministic_outcome() {
        let up = qubit_state(&StokesPoint::new([0.0, 0.0, 0.999_999]).unwrap());
        let pvm = pvm_from_observable(&pauli()[2]).unwrap();
        let p = outcome_distribution(&up, &pvm).unwrap();
        assert_abs_diff_eq!(p[1], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(p[0], 0.0, epsilon = 1e-6);
        let pure = DensityMatrix::new(pvm.elements()[1].op.clone()).unwrap();
        assert_eq!(outcome_distribution(&pure, &pvm).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn distribution_dim_mismatch() {
        let rho = DensityMatrix::maximally_mixed(3);
        assert!(matches!(
            outcome_distribution(&rho, &qubit_tomography_povm()),
            Err(MeasurementError::DimMismatch { .. })
        ));
    }

    #[test]
    fn mub_overlaps() {
        for q in 2..=5 {
            let fam = MubFamily::new(q).unwrap();
            let (ortho, unbiased) = fam.overlap_errors();
            assert!(ortho < 1e-10, "q={q} ortho {ortho}");
            assert!(unbiased < 1e-9, "q={q} overlap {unbiased}");
        }
        assert!(matches!(MubFamily::new(6), Err(MeasurementError::UnsupportedDimension(6))));
        assert!(MubFamily::new(7).is_err());
    }

    #[test]
    fn mub_tomography_matches_qubit_tomography() {
        let t = qubit_tomography_povm();
        let m = mub_tomography_povm(&MubFamily::new(2).unwrap());
        assert_eq!(m.len(), 6);
        // Same element set up to order.
        for e in t.elements() {
            assert!(m.elements().iter().any(|f| close(&e.op, &f.op) < 1e-12));
        }
        let m3 = mub_tomography_povm(&MubFamily::new(3).unwrap());
        assert_eq!(m3.len(), 12);
        for e in m3.elements() {
            assert_abs_diff_eq!(e.op.trace().re, 0.25, epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_incomplete() {
        let e = PovmElement {
            label: "a".into(),
            op: ComplexMatrix::identity(2, 2) * Complex64::from(0.5),
            provenance: None,
        };
        assert!(matches!(Povm::new(2, vec![e]), Err(MeasurementError::NotComplete { .. })));
        let neg = PovmElement {
            label: "n".into(),
            op: ComplexMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::from(1.5), Complex64::from(-0.5)])),
            provenance: None,
        };
        let comp = PovmElement {
            label: "c".into(),
            op: ComplexMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::from(-0.5), Complex64::from(1.5)])),
            provenance: None,
        };
        assert!(matches!(Povm::new(2, vec![neg, comp]), Err(MeasurementError::NotPositive { .. })));
    }

    #[test]
    fn json_round_trip() {
        let t = qubit_tomography_povm();
        let text = serde_json::to_string(&t.to_json()).unwrap();
        let back = Povm::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, t);
    }
}
