mod common;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use proptest::prelude::*;
use qest::estimation::{
    c_opt_closed, classical_fisher, indicatrix_points, lagrange_min_numeric, lu_estimator, optimal_measurement,
    qcr_min_trace, rot_weight, tomo_excess, tomo_excess_forms, tomography_weight, weight_from_fisher,
    weighted_trace_inverse, RotWeight,
};
use qest::linalg::{hermitian_eig, psd_sqrt, solve_sld, ComplexMatrix, RealMatrix};
use qest::measurement::{pvm_from_observable, qubit_tomography_povm, randomize, Povm};
use qest::random;
use qest::simulator::{clamp_to_ball, format_number, mle_maximize, AppliedElement, LogLikelihood, MleOptions};
use qest::state::{
    bures_distance, model_qfi, pauli, qubit_qfi, qubit_slds, qubit_state, ModelDerivatives, StokesPoint,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn config() -> ProptestConfig {
    ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) }
}

prop_compose! {
    fn ball_point(r_max: f64)(theta in 0.0..std::f64::consts::PI, phi in 0.0..(2.0 * std::f64::consts::PI), s in 0.0..1.0f64) -> StokesPoint {
        let r = r_max * s;
        StokesPoint::new([r * theta.sin() * phi.cos(), r * theta.sin() * phi.sin(), r * theta.cos()]).unwrap()
    }
}

fn rng_from(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn random_hermitian(rng: &mut ChaCha20Rng, n: usize) -> ComplexMatrix {
    let b = random::full_rank_state(rng, n);
    let c = random::full_rank_state(rng, n);
    (b.matrix() - c.matrix()) * Complex64::from(3.0)
}

fn max_abs_c(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn eigendecomposition_reconstructs(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = rng_from(seed);
        let a = random_hermitian(&mut rng, n);
        let e = hermitian_eig(&a).unwrap();
        prop_assert!(max_abs_c(&(e.reconstruct() - &a)) < 1e-10);
        let v = &e.eigenvectors;
        prop_assert!(max_abs_c(&(v.adjoint() * v - ComplexMatrix::identity(n, n))) < 1e-10);
        prop_assert!(e.eigenvalues.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn psd_sqrt_squares_back_and_commutes(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = rng_from(seed);
        let rho = random::full_rank_state(&mut rng, n);
        let a = rho.matrix();
        let s = psd_sqrt(a).unwrap();
        prop_assert!(max_abs_c(&(&s * &s - a)) < 1e-10);
        prop_assert!(max_abs_c(&(&s * a - a * &s)) < 1e-10);
    }

    #[test]
    fn sld_solves_its_equation(seed in any::<u64>(), n in 2usize..5) {
        let mut rng = rng_from(seed);
        let rho = random::full_rank_state(&mut rng, n);
        let gens = random::gell_mann(n);
        let k = (seed as usize) % gens.len();
        let l = solve_sld(rho.matrix(), &gens[k]).unwrap();
        let lhs = (&l * rho.matrix() + rho.matrix() * &l) * Complex64::from(0.5);
        prop_assert!(max_abs_c(&(lhs - &gens[k])) < 1e-9);
        prop_assert!(max_abs_c(&(&l - l.adjoint())) < 1e-9);
    }

    #[test]
    fn qubit_qfi_inverse_is_identity_minus_outer(x in ball_point(0.99)) {
        let j = qubit_qfi(&x);
        let v = x.vector();
        let inv = RealMatrix::identity(3, 3) - RealMatrix::from_fn(3, 3, |i, k| v[i] * v[k]);
        prop_assert!((j * inv - RealMatrix::identity(3, 3)).amax() < 1e-9);
    }

    #[test]
    fn numeric_and_closed_form_slds_agree(x in ball_point(0.95)) {
        let half = Complex64::from(0.5);
        let partials: Vec<ComplexMatrix> = pauli().iter().map(|s| s * half).collect();
        let numeric = ModelDerivatives::from_partials(qubit_state(&x), partials).unwrap();
        let closed = qubit_slds(&x);
        for (a, b) in numeric.slds.iter().zip(&closed.slds) {
            prop_assert!(max_abs_c(&(a - b)) < 1e-9);
        }
        prop_assert!((model_qfi(&numeric) - qubit_qfi(&x)).amax() < 1e-8);
    }

    #[test]
    fn bures_matches_qubit_formula(x in ball_point(0.95), y in ball_point(0.95)) {
        let b = bures_distance(&qubit_state(&x), &qubit_state(&y)).unwrap();
        let back = bures_distance(&qubit_state(&y), &qubit_state(&x)).unwrap();
        prop_assert!((b - common::qubit_bures(&x.coords(), &y.coords())).abs() < 1e-9);
        prop_assert!((b - back).abs() < 1e-9);
        prop_assert!(b >= 0.0);
        prop_assert!(bures_distance(&qubit_state(&x), &qubit_state(&x)).unwrap() < 1e-12);
    }

    #[test]
    fn bures_remainder_is_cubic(x in ball_point(0.8), seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let dir = random::unit_vector(&mut rng, 3);
        let j = common::qfi(&x.coords());
        let residual = |h: f64| {
            let dx = &dir * h;
            let c = x.coords();
            let y = StokesPoint::new([c[0] + dx[0], c[1] + dx[1], c[2] + dx[2]]).unwrap();
            let b = common::qubit_bures(&c, &y.coords());
            (b - 0.5 * (dx.transpose() * &j * &dx)[(0, 0)]).abs()
        };
        // |B − ½ dxᵀ J dx| ≤ K |dx|³ with K growing like 1/(1 − r²)²; empirically K·(1 − r²)² < 0.5 for r ≤ 0.8.
        let scale = 1.0 / (1.0 - x.radius().powi(2)).powi(2);
        for h in [1e-2, 1e-3, 1e-4] {
            prop_assert!(residual(h) <= scale * h.powi(3) + 1e-15, "h = {h}: {}", residual(h));
        }
    }

    #[test]
    fn pvm_elements_are_projectors(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = rng_from(seed);
        let a = random_hermitian(&mut rng, n);
        let pvm = pvm_from_observable(&a).unwrap();
        let mut sum = ComplexMatrix::zeros(n, n);
        for e in pvm.elements() {
            prop_assert!(max_abs_c(&(&e.op * &e.op - &e.op)) < 1e-9);
            sum += &e.op;
        }
        prop_assert!(max_abs_c(&(sum - ComplexMatrix::identity(n, n))) < 1e-9);
    }

    #[test]
    fn randomize_is_associative(seed in any::<u64>(), p in 0.05..0.95f64, q in 0.05..0.95f64) {
        let mut rng = rng_from(seed);
        let (a, b, c) = (random::povm(&mut rng, 2, 2), random::povm(&mut rng, 2, 3), random::povm(&mut rng, 2, 2));
        let nested = randomize(&[(p, randomize(&[(q, a.clone()), (1.0 - q, b.clone())]).unwrap()), (1.0 - p, c.clone())]).unwrap();
        let flat = randomize(&[(p * q, a), (p * (1.0 - q), b), (1.0 - p, c)]).unwrap();
        prop_assert_eq!(nested.len(), flat.len());
        for (u, v) in nested.ops().zip(flat.ops()) {
            prop_assert!(max_abs_c(&(u - v)) < 1e-12);
        }
    }

    #[test]
    fn fisher_is_affine_in_mixtures(x in ball_point(0.9), seed in any::<u64>(), p in 0.0..1.0f64) {
        let mut rng = rng_from(seed);
        let d = qubit_slds(&x);
        let (a, b) = (random::povm(&mut rng, 2, 3), random::povm(&mut rng, 2, 4));
        let mix = randomize(&[(p, a.clone()), (1.0 - p, b.clone())]).unwrap();
        let lhs = classical_fisher(&d, &mix).unwrap();
        let rhs = classical_fisher(&d, &a).unwrap() * p + classical_fisher(&d, &b).unwrap() * (1.0 - p);
        prop_assert!((lhs - rhs).amax() < 1e-10);
    }

    #[test]
    fn gill_massar_inequality(seed in any::<u64>(), q in 2usize..5, extra in 0usize..6) {
        let mut rng = rng_from(seed);
        let d = random::full_model(&mut rng, q);
        let g = classical_fisher(&d, &random::povm(&mut rng, q, q + extra)).unwrap();
        let jinv = common::sym_fn(&model_qfi(&d), |l| 1.0 / l);
        prop_assert!((jinv * g).trace() <= (q - 1) as f64 + 1e-9);
    }

    #[test]
    fn optimality_chain(x in ball_point(0.9), seed in any::<u64>(), n in 4usize..8) {
        let mut rng = rng_from(seed);
        let h = random::pd_matrix(&mut rng, 3);
        let j = qubit_qfi(&x);
        let g = classical_fisher(&qubit_slds(&x), &random::povm(&mut rng, 2, n)).unwrap();
        let bound = qcr_min_trace(&j, &h, 2).unwrap().bound;
        let quantum = (&h * common::sym_fn(&common::qfi(&x.coords()), |l| 1.0 / l)).trace();
        if let Ok(value) = weighted_trace_inverse(&h, &g) {
            prop_assert!(value >= bound * (1.0 - 1e-9));
        }
        prop_assert!(bound >= quantum * (1.0 - 1e-12));
    }

    #[test]
    fn optimal_measurement_attains_bound(x in ball_point(0.95), seed in any::<u64>(), params in 1usize..4) {
        let mut rng = rng_from(seed);
        let idx: Vec<usize> = (0..params).collect();
        let d = qubit_slds(&x).restrict(&idx);
        let j = model_qfi(&d);
        let h = random::pd_matrix(&mut rng, params);
        let sol = optimal_measurement(&d, &j, &h).unwrap();
        let g = classical_fisher(&d, sol.measurement.as_ref().unwrap()).unwrap();
        prop_assert!((&g - common::fisher_target(&j, &h)).amax() < 1e-8);
        prop_assert!((sol.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((weighted_trace_inverse(&h, &g).unwrap() - sol.bound).abs() < 1e-7 * sol.bound);
    }

    #[test]
    fn tomography_is_optimal_for_its_weight(x in ball_point(0.95)) {
        let g = classical_fisher(&qubit_slds(&x), &qubit_tomography_povm()).unwrap();
        let h = tomography_weight(&x);
        let bound = common::min_trace(&common::qfi(&x.coords()), &h);
        prop_assert!((weighted_trace_inverse(&h, &g).unwrap() - bound).abs() < 1e-8);
    }

    #[test]
    fn fisher_to_weight_is_injective(x in ball_point(0.9), seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let j = qubit_qfi(&x);
        let f1 = classical_fisher(&qubit_slds(&x), &qubit_tomography_povm()).unwrap();
        let f2 = common::fisher_target(&j, &random::pd_matrix(&mut rng, 3));
        let w1 = weight_from_fisher(&f1, &j, 1.0).unwrap();
        let w2 = weight_from_fisher(&f2, &j, 1.0).unwrap();
        prop_assert!(w1.feasible && w2.feasible);
        let t1 = qcr_min_trace(&j, &w1.weight, 2).unwrap().fisher_target;
        let t2 = qcr_min_trace(&j, &w2.weight, 2).unwrap().fisher_target;
        prop_assert!((&t1 - &f1).amax() < 1e-8);
        prop_assert!((&t2 - &f2).amax() < 1e-8);
        if (&f1 - &f2).amax() > 1e-6 {
            prop_assert!((t1 - t2).amax() > 1e-8);
        }
    }

    #[test]
    fn rotational_weights_are_rotation_invariant(x in ball_point(0.95), seed in any::<u64>(), f in 0.1..5.0f64, g in 0.1..5.0f64) {
        let mut rng = rng_from(seed);
        let r = random::rotation(&mut rng);
        let rd = DMatrix::from_fn(3, 3, |i, k| r[(i, k)]);
        let y = r * x.vector();
        let y = StokesPoint::new([y[0], y[1], y[2]]).unwrap();
        for spec in [RotWeight::Identity, RotWeight::Qfi, RotWeight::Constant { f, g }] {
            let back = rd.transpose() * rot_weight(spec, &y) * &rd;
            prop_assert!((back - rot_weight(spec, &x)).amax() < 1e-10);
            let c = qcr_min_trace(&qubit_qfi(&y), &rot_weight(spec, &y), 2).unwrap().bound;
            prop_assert!((c - c_opt_closed(spec, x.radius())).abs() < 1e-8 * c.max(1.0));
        }
    }

    #[test]
    fn excess_forms_agree(x in ball_point(0.99), f in 0.1..5.0f64, g in 0.1..5.0f64) {
        for spec in [RotWeight::Identity, RotWeight::Qfi, RotWeight::Constant { f, g }] {
            let e = tomo_excess(spec, &x);
            let (d1, d2) = tomo_excess_forms(spec, &x);
            let scale = e.abs().max(1.0);
            prop_assert!((d1 - e).abs() < 1e-8 * scale);
            prop_assert!((d2 - e).abs() < 1e-8 * scale);
            prop_assert!(e >= -1e-10 * scale);
        }
    }

    #[test]
    fn lagrange_minimum(seed in any::<u64>(), d in 1usize..4) {
        let mut rng = rng_from(seed);
        let s = random::pd_matrix(&mut rng, d);
        let root = common::sym_fn(&s, f64::sqrt);
        let closed = root.trace().powi(2);
        let out = lagrange_min_numeric(&s, 20_000).unwrap();
        prop_assert!(out.value >= closed * (1.0 - 1e-10));
        prop_assert!((out.value - closed).abs() < 1e-5);
        prop_assert!((&out.minimizer - &root / root.trace()).amax() < 1e-3);
    }

    #[test]
    fn lu_estimator_is_locally_unbiased(x in ball_point(0.9), seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let d = qubit_slds(&x);
        let m: Povm = random::povm(&mut rng, 2, 5);
        let g = classical_fisher(&d, &m).unwrap();
        let est = lu_estimator(&x.coords(), &d, &m, &g).unwrap();
        let probs: Vec<f64> = m.ops().map(|op| qest::linalg::trace_product(qubit_state(&x).matrix(), op).re).collect();
        let mean = est.iter().zip(&probs).fold(nalgebra::DVector::zeros(3), |acc, (e, p)| acc + e * *p);
        prop_assert!((mean - x.vector()).amax() < 1e-9);
        let mut cov = RealMatrix::zeros(3, 3);
        for (e, p) in est.iter().zip(&probs) {
            let dv = e - nalgebra::DVector::from_column_slice(&x.coords());
            cov += &dv * dv.transpose() * *p;
        }
        let ginv = common::sym_fn(&g, |l| 1.0 / l);
        prop_assert!((cov - &ginv).amax() < 1e-8 * ginv.amax().max(1.0));
    }

    #[test]
    fn indicatrix_lies_on_quadric(seed in any::<u64>(), a in 0usize..3, b in 0usize..3) {
        prop_assume!(a != b);
        let mut rng = rng_from(seed);
        let h = random::pd_matrix(&mut rng, 3);
        for v in indicatrix_points(&h, (a, b), 37).unwrap() {
            let q = v[0] * v[0] * h[(a, a)] + v[1] * v[1] * h[(b, b)] + 2.0 * v[0] * v[1] * h[(a, b)];
            prop_assert!((q - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn clamp_is_idempotent_projection(x in -3.0..3.0f64, y in -3.0..3.0f64, z in -3.0..3.0f64) {
        let once = clamp_to_ball([x, y, z], 1e-6);
        let twice = clamp_to_ball(once.coords(), 1e-6);
        prop_assert_eq!(once, twice);
        prop_assert!(once.radius() <= 1.0 - 1e-6 + 1e-15);
        let v = Vector3::new(x, y, z);
        prop_assert!(once.vector().cross(&v).norm() < 1e-12 * v.norm().max(1.0));
    }

    #[test]
    fn mle_never_decreases_likelihood(seed in any::<u64>(), n in 1usize..40, init in ball_point(0.9)) {
        let mut rng = rng_from(seed);
        let m = random::povm(&mut rng, 2, 4);
        let history: Vec<AppliedElement> = (0..n)
            .map(|k| {
                let e = &m.elements()[(seed as usize + 7 * k) % 4];
                AppliedElement { op: e.op.clone(), label: e.label.clone() }
            })
            .collect();
        let lik = LogLikelihood::from_history(&history);
        let out = mle_maximize(&lik, init.coords(), &MleOptions::default());
        prop_assert!(out.log_likelihood >= lik.value(&init.vector()) - 1e-12);
        prop_assert!(Vector3::from(out.x).norm() <= 1.0 - 1e-6 + 1e-12);
    }

    #[test]
    fn numbers_round_trip_through_text(v in any::<f64>()) {
        prop_assume!(v.is_finite());
        prop_assert_eq!(format_number(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn stokes_point_json_round_trip(x in ball_point(0.99)) {
        let s = serde_json::to_string(&x).unwrap();
        prop_assert_eq!(serde_json::from_str::<StokesPoint>(&s).unwrap(), x);
    }
}
