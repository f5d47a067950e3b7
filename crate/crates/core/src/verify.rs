//! Self-check suites behind `qest verify`.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::estimation::{
    c_opt_closed, c_tomo_closed, classical_fisher, hat_fisher, lagrange_min_numeric, mub_bounds_at,
    optimal_measurement, qcr_min_trace, rot_weight, tomography_weight, weighted_trace_inverse, RotWeight,
};
use crate::linalg::{pd_inv_sqrt, pd_inverse, psd_sqrt, RealMatrix};
use crate::measurement::{mub_bases, pvm_from_observable, qubit_tomography_povm, randomize};
use crate::random;
use crate::simulator::{monte_carlo, EstimatorKind, RunConfig, WeightSelector};
use crate::state::{bures_distance, model_qfi, qubit_qfi, qubit_slds, qubit_state, MubModelPoint, StokesPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    Lemmas,
    Bounds,
    McSmoke,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "all" => Some(Self::All),
            "lemmas" => Some(Self::Lemmas),
            "bounds" => Some(Self::Bounds),
            "mc-smoke" => Some(Self::McSmoke),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed discrepancy (or the statistic being tested).
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "[{}] {}/{}: worst {:.3e} (tol {:.1e}) {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.suite,
                c.name,
                c.worst,
                c.tolerance,
                c.detail
            ));
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        out.push_str(&format!("{} checks, {} failed\n", self.checks.len(), failed));
        out
    }
}

fn check(suite: &'static str, name: &'static str, worst: f64, tolerance: f64, detail: String) -> Check {
    Check { suite, name, passed: worst.is_finite() && worst <= tolerance, worst, tolerance, detail }
}

fn failed(suite: &'static str, name: &'static str, detail: String) -> Check {
    Check { suite, name, passed: false, worst: f64::NAN, tolerance: 0.0, detail }
}

fn max_abs(m: &RealMatrix) -> f64 {
    m.amax()
}

type CheckResult = Result<Check, String>;

fn run(suite: &'static str, name: &'static str, f: impl FnOnce() -> CheckResult) -> Check {
    f().unwrap_or_else(|e| failed(suite, name, e))
}

/// Runs the requested suite with a deterministic RNG.
pub fn run_suite(suite: Suite, seed: u64) -> Report {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    if matches!(suite, Suite::All | Suite::Lemmas) {
        checks.push(run("lemmas", "lemma-vv", || lemma_vv(&mut rng)));
        checks.push(run("lemmas", "gill-massar", || gill_massar(&mut rng)));
        checks.push(run("lemmas", "convexity", || convexity(&mut rng)));
        checks.push(run("lemmas", "lagrange", || lagrange(&mut rng)));
        checks.push(run("lemmas", "theorem1", || theorem_one(&mut rng)));
        checks.push(run("lemmas", "tomography-identities", || tomography_identities(&mut rng)));
        checks.push(run("lemmas", "attainment", || attainment(&mut rng)));
        checks.push(run("lemmas", "bures-expansion", || bures_expansion(&mut rng)));
    }
    if matches!(suite, Suite::All | Suite::Bounds) {
        checks.push(run("bounds", "closed-forms", || closed_forms(&mut rng)));
        checks.push(run("bounds", "limits", limits));
        checks.push(run("bounds", "mub", mub_suite));
    }
    if matches!(suite, Suite::All | Suite::McSmoke) {
        checks.extend(mc_smoke(seed));
    }
    let passed = checks.iter().all(|c| c.passed);
    Report { seed, passed, checks }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// `ĝ(PVM of Σ_k (√J⁻¹ v)_k L_k) = |v⟩⟨v|` for unit `v`.
fn lemma_vv(rng: &mut ChaCha20Rng) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let x = random::ball_point(rng, 0.95);
        let d = qubit_slds(&x);
        let j = qubit_qfi(&x);
        let v = random::unit_vector(rng, 3);
        let c = pd_inv_sqrt(&j).map_err(err)? * &v;
        let obs = d.slds.iter().zip(c.iter()).fold(crate::linalg::ComplexMatrix::zeros(2, 2), |acc, (l, ck)| {
            acc + l * num_complex::Complex64::from(*ck)
        });
        let m = pvm_from_observable(&obs).map_err(err)?;
        let g = classical_fisher(&d, &m).map_err(err)?;
        let gh = hat_fisher(&g, &j, &RealMatrix::identity(3, 3)).map_err(err)?;
        worst = worst.max(max_abs(&(gh - &v * v.transpose())));
    }
    Ok(check("lemmas", "lemma-vv", worst, 1e-8, "50 random (x, v)".into()))
}

/// `Tr J⁻¹ g(M) ≤ q − 1` for random POVMs.
fn gill_massar(rng: &mut ChaCha20Rng) -> CheckResult {
    let mut worst = f64::NEG_INFINITY;
    for q in 2..=4 {
        for _ in 0..100 {
            let d = random::full_model(rng, q);
            let j = model_qfi(&d);
            let n = rng.gen_range(q..=q * q + 2);
            let m = random::povm(rng, q, n);
            let g = classical_fisher(&d, &m).map_err(err)?;
            let tr = (pd_inverse(&j).map_err(err)? * g).trace();
            worst = worst.max(tr - (q - 1) as f64);
        }
    }
    Ok(check("lemmas", "gill-massar", worst.max(0.0), 1e-9, "excess of Tr J⁻¹g over q−1, q = 2..4".into()))
}

/// `g(p M ⊕ (1−p) N) = p g(M) + (1−p) g(N)`.
fn convexity(rng: &mut ChaCha20Rng) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = random::ball_point(rng, 0.9);
        let d = qubit_slds(&x);
        let a = random::povm(rng, 2, 3);
        let b = random::povm(rng, 2, 4);
        let p: f64 = rng.gen_range(0.05..0.95);
        let mix = randomize(&[(p, a.clone()), (1.0 - p, b.clone())]).map_err(err)?;
        let lhs = classical_fisher(&d, &mix).map_err(err)?;
        let rhs = classical_fisher(&d, &a).map_err(err)? * p + classical_fisher(&d, &b).map_err(err)? * (1.0 - p);
        worst = worst.max(max_abs(&(lhs - rhs)));
    }
    Ok(check("lemmas", "convexity", worst, 1e-10, "20 random mixtures".into()))
}

/// Numerical `min Tr S G⁻¹` over unit-trace `G` against `(Tr √S)²`.
fn lagrange(rng: &mut ChaCha20Rng) -> CheckResult {
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let d = 1 + k % 3;
        let s = random::pd_matrix(rng, d);
        let closed = psd_sqrt(&s).map_err(err)?.trace().powi(2);
        let out = lagrange_min_numeric(&s, 20_000).map_err(err)?;
        worst = worst.max((out.value - closed).abs());
    }
    Ok(check("lemmas", "lagrange", worst, 1e-5, "20 random S, d ≤ 3".into()))
}

/// Tomography attains the bound for its own weight and is strictly worse for `H = I` off the axes.
fn theorem_one(rng: &mut ChaCha20Rng) -> CheckResult {
    let mut worst_eq: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    let tomo = qubit_tomography_povm();
    for _ in 0..20 {
        let x = random::ball_point(rng, 0.95);
        let g = classical_fisher(&qubit_slds(&x), &tomo).map_err(err)?;
        let j = qubit_qfi(&x);
        let h = tomography_weight(&x);
        let bound = qcr_min_trace(&j, &h, 2).map_err(err)?.bound;
        worst_eq = worst_eq.max((weighted_trace_inverse(&h, &g).map_err(err)? - bound).abs());

        let y = off_axis_point(rng);
        let g = classical_fisher(&qubit_slds(&y), &tomo).map_err(err)?;
        let id = RealMatrix::identity(3, 3);
        let bound = qcr_min_trace(&qubit_qfi(&y), &id, 2).map_err(err)?.bound;
        min_gap = min_gap.min(weighted_trace_inverse(&id, &g).map_err(err)? / bound - 1.0);
    }
    let mut c = check("lemmas", "theorem1", worst_eq, 1e-8, format!("min relative gap for H=I: {min_gap:.3e}"));
    c.passed &= min_gap > 1e-6;
    Ok(c)
}

/// Point with distinct coordinates, each of magnitude above 0.05.
pub fn off_axis_point<R: Rng + ?Sized>(rng: &mut R) -> StokesPoint {
    loop {
        let x = random::ball_point(rng, 0.95);
        let c = x.coords();
        let distinct = (c[0].abs() - c[1].abs()).abs() > 0.05
            && (c[1].abs() - c[2].abs()).abs() > 0.05
            && (c[0].abs() - c[2].abs()).abs() > 0.05;
        if c.iter().all(|v| v.abs() > 0.05) && distinct {
            return x;
        }
    }
}

/// `Tr J⁻¹ g(M^(T)) = 1` and `H^(T) = 9 g J⁻¹ g`.
fn tomography_identities(rng: &mut ChaCha20Rng) -> CheckResult {
    let mut worst_trace: f64 = 0.0;
    let mut worst_weight: f64 = 0.0;
    let tomo = qubit_tomography_povm();
    for _ in 0..100 {
        let x = random::ball_point(rng, 0.95);
        let g = classical_fisher(&qubit_slds(&x), &tomo).map_err(err)?;
        let ji = pd_inverse(&qubit_qfi(&x)).map_err(err)?;
        worst_trace = worst_trace.max(((&ji * &g).trace() - 1.0).abs());
        worst_weight = worst_weight.max(max_abs(&(tomography_weight(&x) - &g * &ji * &g * 9.0)));
    }
    let mut c =
        check("lemmas", "tomography-identities", worst_trace, 1e-10, format!("weight identity {worst_weight:.3e}"));
    c.passed &= worst_weight <= 1e-9;
    Ok(c)
}

/// The constructed random measurement has the target Fisher information.
fn attainment(rng: &mut ChaCha20Rng) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = random::ball_point(rng, 0.95);
        let h = random::pd_matrix(rng, 3);
        let d = qubit_slds(&x);
        let j = qubit_qfi(&x);
        let sol = optimal_measurement(&d, &j, &h).map_err(err)?;
        let m = sol.measurement.as_ref().ok_or("no measurement")?;
        let g = classical_fisher(&d, m).map_err(err)?;
        worst = worst.max(max_abs(&(g - &sol.fisher_target)));
    }
    Ok(check("lemmas", "attainment", worst, 1e-8, "100 random (x, H)".into()))
}

/// `B(τ_x, τ_{x+dx}) ≈ ½ dxᵀ J dx` with a cubic remainder.
fn bures_expansion(rng: &mut ChaCha20Rng) -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut worst_ratio = f64::INFINITY;
    for _ in 0..50 {
        let x = random::ball_point(rng, 0.8);
        let j = qubit_qfi(&x);
        let dir = random::unit_vector(rng, 3);
        let residual = |h: f64| -> Result<f64, String> {
            let dx = &dir * h;
            let y = x.vector() + Vector3::new(dx[0], dx[1], dx[2]);
            let y = StokesPoint::new([y[0], y[1], y[2]]).map_err(err)?;
            let b = bures_distance(&qubit_state(&x), &qubit_state(&y)).map_err(err)?;
            Ok((b - 0.5 * (dx.transpose() * &j * &dx)[(0, 0)]).abs())
        };
        let scale = 1.0 / (1.0 - x.radius().powi(2)).powi(2);
        let r1 = residual(1e-3)?;
        let r2 = residual(5e-4)?;
        worst = worst.max(r1 / scale);
        worst_ratio = worst_ratio.min(r1 / r2);
    }
    let mut c = check("lemmas", "bures-expansion", worst, 1e-7, format!("min halving ratio {worst_ratio:.2}"));
    c.passed &= worst_ratio >= 6.0;
    Ok(c)
}

/// Closed forms against numeric Fisher computations over a radius grid.
fn closed_forms(rng: &mut ChaCha20Rng) -> CheckResult {
    let mut worst: f64 = 0.0;
    let tomo = qubit_tomography_povm();
    let specs = [RotWeight::Identity, RotWeight::Qfi, RotWeight::Constant { f: 2.0, g: 0.5 }];
    for k in 0..20 {
        let r = 0.05 * k as f64;
        for _ in 0..20 {
            let v = random::unit_vector(rng, 3) * r;
            let x = StokesPoint::new([v[0], v[1], v[2]]).map_err(err)?;
            let j = qubit_qfi(&x);
            let g = classical_fisher(&qubit_slds(&x), &tomo).map_err(err)?;
            for spec in specs {
                let h = rot_weight(spec, &x);
                let c = qcr_min_trace(&j, &h, 2).map_err(err)?.bound;
                let ct = weighted_trace_inverse(&h, &g).map_err(err)?;
                worst = worst.max((c_opt_closed(spec, r) - c).abs());
                worst = worst.max((c_tomo_closed(spec, &x) - ct).abs());
            }
        }
    }
    Ok(check("bounds", "closed-forms", worst, 1e-8, "20 radii × 20 directions × 3 weights".into()))
}

/// Limits along (1,1,1)/√3.
fn limits() -> CheckResult {
    let at = |r: f64| {
        let s = r / 3f64.sqrt();
        StokesPoint::new([s, s, s]).expect("inside the ball")
    };
    let x = at(0.9999);
    // c approaches 4 like 4√(1 − r²), so it needs more nines than cT.
    let c_id = c_opt_closed(RotWeight::Identity, 0.999999);
    let ct_id = c_tomo_closed(RotWeight::Identity, &x);
    let mut qfi_dev: f64 = 0.0;
    for k in 0..100 {
        let r = 0.01 * k as f64;
        qfi_dev = qfi_dev.max((c_opt_closed(RotWeight::Qfi, r) - 9.0).abs());
    }
    let ct_qfi = c_tomo_closed(RotWeight::Qfi, &at(0.995));
    let ok = (4.0..=4.01).contains(&c_id) && (5.99..=6.01).contains(&ct_id) && ct_qfi > 100.0;
    let mut c =
        check("bounds", "limits", qfi_dev, 1e-8, format!("H=I: c={c_id:.5} cT={ct_id:.5}; H=J: cT(0.995)={ct_qfi:.2}"));
    c.passed &= ok;
    Ok(c)
}

/// MUB overlaps and the `c^(T) ≥ cGM` sweep along `v₁₁`.
fn mub_suite() -> CheckResult {
    let mut worst: f64 = 0.0;
    for q in 2..=5 {
        let (ortho, overlap) = mub_bases(q).map_err(err)?.overlap_errors();
        worst = worst.max(ortho).max(overlap);
    }
    let mut sweep_ok = true;
    for q in [3, 4] {
        let family = mub_bases(q).map_err(err)?;
        let mut dir = vec![0.0; MubModelPoint::n_params(q)];
        dir[MubModelPoint::index(q, 1, 1)] = 1.0;
        let mut previous = 0.0;
        for k in 0..20 {
            let row = mub_bounds_at(&family, &dir, 0.05 * k as f64).map_err(err)?;
            sweep_ok &= row.c_tomo >= row.c_gm - 1e-9;
            sweep_ok &= row.c_tomo >= previous - 1e-9;
            previous = row.c_tomo;
        }
        let near = mub_bounds_at(&family, &dir, 0.999).map_err(err)?;
        sweep_ok &= near.c_tomo > 10.0 * near.c_gm;
    }
    let mut c =
        check("bounds", "mub", worst, 1e-9, format!("sweep ordering {}", if sweep_ok { "ok" } else { "violated" }));
    c.passed &= sweep_ok;
    Ok(c)
}

/// Reduced Monte Carlo at (0.55, 0.55, 0.55) with `H = J`.
fn mc_smoke(seed: u64) -> Vec<Check> {
    let x0 = StokesPoint::new([0.55; 3]).expect("inside the ball");
    let cfg = RunConfig::new(x0, WeightSelector::Qfi, 1000, 50, seed);
    let summaries = match monte_carlo(&cfg, &[EstimatorKind::Tomography, EstimatorKind::Adaptive], None) {
        Ok(s) => s,
        Err(e) => return vec![failed("mc-smoke", "monte-carlo", e.to_string())],
    };
    let last = |k: usize| {
        let s = &summaries[k];
        let i = s.checkpoints.len() - 1;
        (s.mean_bures[i], s.se_bures[i], s.theoretical_opt, s.theoretical_tomo)
    };
    let (tm, tse, _, ct) = last(0);
    let (am, ase, c, _) = last(1);
    let z_tomo = (tm - ct).abs() / tse;
    let rel_adapt = (am - c).abs() / c;
    let separation = (tm - am) / (tse * tse + ase * ase).sqrt();
    vec![
        check("mc-smoke", "tomography", z_tomo, 5.0, format!("mean {tm:.3} vs {ct:.3} (stderr units)")),
        check("mc-smoke", "adaptive", rel_adapt, 0.25, format!("mean {am:.3} vs {c:.3} (relative)")),
        Check {
            suite: "mc-smoke",
            name: "separation",
            passed: separation > 3.0,
            worst: separation,
            tolerance: 3.0,
            detail: "tomography minus adaptive, in stderr units (must exceed tolerance)".into(),
        },
    ]
}
