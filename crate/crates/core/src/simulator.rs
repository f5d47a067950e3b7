//! Monte Carlo comparison of plain qubit tomography against adaptive
//! maximum-likelihood estimation with per-step optimal measurements.
//!
//! Every trial draws from its own ChaCha stream derived from
//! `(seed, estimator, trial index)`, and aggregation runs in trial order, so
//! summaries do not depend on the thread count.

use std::fmt::Write as _;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{
    classical_fisher, optimal_measurement, qcr_min_trace, rot_weight, tomography_weight, weighted_trace_inverse,
    EstimationError, RotWeight, Weight,
};
use crate::linalg::{ComplexMatrix, RealMatrix};
use crate::measurement::{outcome_distribution, qubit_tomography_povm, MeasurementError, Povm};
use crate::state::{bures_distance, pauli, qubit_qfi, qubit_slds, qubit_state, DensityMatrix, StateError, StokesPoint};

/// Probability floor inside the log-likelihood.
pub const PROBABILITY_FLOOR: f64 = 1e-12;
/// Steps between multi-start MLE refreshes.
pub const RESTART_PERIOD: usize = 50;
/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "QEST_THREADS";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

/// Which weight the adaptive scheme optimizes at each estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightSelector {
    Identity,
    Qfi,
    Tomography,
    Custom { matrix: [[f64; 3]; 3] },
}

impl WeightSelector {
    pub fn resolve(&self, x: &StokesPoint) -> Weight {
        match self {
            WeightSelector::Identity => rot_weight(RotWeight::Identity, x),
            WeightSelector::Qfi => rot_weight(RotWeight::Qfi, x),
            WeightSelector::Tomography => tomography_weight(x),
            WeightSelector::Custom { matrix } => RealMatrix::from_fn(3, 3, |i, j| matrix[i][j]),
        }
    }

    pub fn parse(s: &str) -> Result<Self, SimError> {
        match s {
            "identity" => Ok(Self::Identity),
            "qfi" => Ok(Self::Qfi),
            "tomography" => Ok(Self::Tomography),
            other => Err(SimError::Config(format!("unknown weight '{other}'"))),
        }
    }
}

fn default_one() -> usize {
    1
}
fn default_restarts() -> usize {
    3
}
fn default_eps() -> f64 {
    1e-6
}
fn default_per_decade() -> usize {
    10
}
fn default_measure_margin() -> f64 {
    1e-2
}

/// Parameters of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunConfig {
    pub x0: StokesPoint,
    pub weight: WeightSelector,
    pub m_max: usize,
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_one")]
    pub adapt_update_every: usize,
    #[serde(default = "default_restarts")]
    pub mle_restarts: usize,
    #[serde(default = "default_eps")]
    pub eps_ball: f64,
    /// Starting estimate of the adaptive scheme.
    #[serde(default)]
    pub initial: [f64; 3],
    #[serde(default = "default_per_decade")]
    pub checkpoints_per_decade: usize,
    /// The adaptive measurement is derived at the estimate pulled inside
    /// radius `1 − measureMargin`.
    #[serde(default = "default_measure_margin")]
    pub measure_margin: f64,
}

impl RunConfig {
    pub fn new(x0: StokesPoint, weight: WeightSelector, m_max: usize, reps: usize, seed: u64) -> Self {
        Self {
            x0,
            weight,
            m_max,
            reps,
            seed,
            adapt_update_every: 1,
            mle_restarts: default_restarts(),
            eps_ball: default_eps(),
            initial: [0.0; 3],
            checkpoints_per_decade: default_per_decade(),
            measure_margin: default_measure_margin(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.m_max < 1 {
            return Err(SimError::Config("m must be at least 1".into()));
        }
        if self.reps < 1 {
            return Err(SimError::Config("reps must be at least 1".into()));
        }
        if self.adapt_update_every < 1 {
            return Err(SimError::Config("adaptUpdateEvery must be at least 1".into()));
        }
        if !(self.eps_ball > 0.0 && self.eps_ball < 1.0) {
            return Err(SimError::Config(format!("epsBall {} outside (0, 1)", self.eps_ball)));
        }
        if !(self.measure_margin >= self.eps_ball && self.measure_margin < 1.0) {
            return Err(SimError::Config(format!("measureMargin {} outside [epsBall, 1)", self.measure_margin)));
        }
        if self.checkpoints_per_decade < 1 {
            return Err(SimError::Config("checkpointsPerDecade must be at least 1".into()));
        }
        if let WeightSelector::Custom { matrix } = &self.weight {
            let h = RealMatrix::from_fn(3, 3, |i, j| matrix[i][j]);
            if (&h - h.transpose()).amax() > 1e-12 || h.clone().cholesky().is_none() {
                return Err(SimError::Config("custom weight must be symmetric positive definite".into()));
            }
        }
        Ok(())
    }

    pub fn checkpoints(&self) -> Vec<usize> {
        checkpoint_schedule(self.m_max, self.checkpoints_per_decade)
    }
}

/// Geometric grid `round(10^(k / per_decade))`, deduplicated, always ending at `m_max`.
pub fn checkpoint_schedule(m_max: usize, per_decade: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut k = 0;
    loop {
        let m = 10f64.powf(k as f64 / per_decade as f64).round() as usize;
        if m > m_max {
            break;
        }
        if out.last() != Some(&m) {
            out.push(m);
        }
        k += 1;
    }
    if out.last() != Some(&m_max) {
        out.push(m_max);
    }
    out
}

/// Radial projection onto the closed ball of radius `1 − eps`.
pub fn clamp_to_ball(x: [f64; 3], eps: f64) -> StokesPoint {
    let v = Vector3::from(x);
    let limit = 1.0 - eps;
    let r = v.norm();
    let mut y = if r <= limit { v } else { v * (limit / r) };
    // Rounding can leave the scaled point an ulp outside; shrink so a second clamp is a no-op.
    while y.norm() > limit {
        y *= 1.0 - f64::EPSILON;
    }
    StokesPoint::new([y[0], y[1], y[2]]).expect("projected point lies inside the ball")
}

/// Inverse-CDF draw from a (possibly unnormalized) probability vector.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

/// Draws one outcome of `m` on `rho`.
pub fn sample_outcome<R: Rng + ?Sized>(rho: &DensityMatrix, m: &Povm, rng: &mut R) -> Result<usize, SimError> {
    Ok(sample_index(&outcome_distribution(rho, m)?, rng))
}

/// Per-axis outcome counts of the tomography measurement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TomographyCounts {
    pub plus: [u64; 3],
    pub minus: [u64; 3],
}

impl TomographyCounts {
    /// Records outcome `2μ` (`+`) or `2μ + 1` (`−`) of [`qubit_tomography_povm`].
    pub fn record(&mut self, outcome: usize) {
        let axis = outcome / 2;
        if outcome % 2 == 0 {
            self.plus[axis] += 1;
        } else {
            self.minus[axis] += 1;
        }
    }

    /// `x̂^μ = (m_μ⁺ − m_μ⁻) / m_μ`, zero for an axis never measured.
    pub fn estimate(&self) -> [f64; 3] {
        let mut x = [0.0; 3];
        for mu in 0..3 {
            let total = self.plus[mu] + self.minus[mu];
            if total > 0 {
                x[mu] = (self.plus[mu] as f64 - self.minus[mu] as f64) / total as f64;
            }
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomographyRun {
    /// Unclamped frequency estimate; may leave the ball.
    pub estimate: [f64; 3],
    pub counts: TomographyCounts,
}

/// `m_total` i.i.d. applications of the tomography measurement to `τ_{x0}`.
pub fn run_tomography<R: Rng + ?Sized>(x0: &StokesPoint, m_total: usize, rng: &mut R) -> TomographyRun {
    let probs = tomography_probabilities(x0);
    let mut counts = TomographyCounts::default();
    for _ in 0..m_total {
        counts.record(sample_index(&probs, rng));
    }
    TomographyRun { estimate: counts.estimate(), counts }
}

fn tomography_probabilities(x0: &StokesPoint) -> Vec<f64> {
    outcome_distribution(&qubit_state(x0), &qubit_tomography_povm()).expect("qubit state and qubit POVM")
}

/// A POVM element applied during a run together with the observed label.
#[derive(Debug, Clone, PartialEq)]
pub struct AppliedElement {
    pub op: ComplexMatrix,
    pub label: String,
}

impl AppliedElement {
    /// `(a, b)` with `Tr τ_x E = a + b·x`.
    pub fn affine(&self) -> (f64, Vector3<f64>) {
        let a = 0.5 * self.op.trace().re;
        let s = pauli();
        let b = Vector3::from_fn(|mu, _| 0.5 * crate::linalg::trace_product(&s[mu], &self.op).re);
        (a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub m: usize,
    pub estimate: [f64; 3],
}

/// History of one adaptive run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialRecord {
    pub applied: Vec<AppliedElement>,
    pub estimates: Vec<Checkpoint>,
    /// MLE calls that ended with a warning (failed line search or multi-start disagreement).
    pub opt_warnings: usize,
}

/// `l(x) = Σ_i log max(a_i + b_i·x, floor)` over the applied elements.
#[derive(Debug, Clone, Default)]
pub struct LogLikelihood {
    terms: Vec<(f64, Vector3<f64>)>,
}

impl LogLikelihood {
    pub fn from_history(history: &[AppliedElement]) -> Self {
        Self { terms: history.iter().map(AppliedElement::affine).collect() }
    }

    pub fn push(&mut self, e: &AppliedElement) {
        self.terms.push(e.affine());
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn value(&self, x: &Vector3<f64>) -> f64 {
        self.terms.iter().map(|(a, b)| (a + b.dot(x)).max(PROBABILITY_FLOOR).ln()).sum()
    }

    fn value_grad_hess(&self, x: &Vector3<f64>) -> (f64, Vector3<f64>, Matrix3<f64>) {
        let mut f = 0.0;
        let mut g = Vector3::zeros();
        let mut h = Matrix3::zeros();
        for (a, b) in &self.terms {
            let p = a + b.dot(x);
            if p <= PROBABILITY_FLOOR {
                f += PROBABILITY_FLOOR.ln();
                continue;
            }
            f += p.ln();
            let s = b / p;
            g += s;
            h -= s * s.transpose();
        }
        (f, g, h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub eps_ball: f64,
    pub max_iter: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { eps_ball: 1e-6, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOutcome {
    pub x: [f64; 3],
    pub log_likelihood: f64,
    /// Set when the line search failed or restarts disagreed.
    pub warning: bool,
}

fn tangent_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let t1 = (helper - n * n.dot(&helper)).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

/// Maximizes the concave log-likelihood over `{|x| ≤ 1 − eps}`.
///
/// Interior iterations take regularized Newton steps followed by radial
/// projection; once the iterate sits on the sphere with the gradient pointing
/// outward, Newton steps on the Lagrangian restricted to the tangent plane are
/// retracted back to the sphere. Every accepted step passes an Armijo test, so
/// the returned value is never below the value at `init`.
pub fn mle_maximize(lik: &LogLikelihood, init: [f64; 3], opts: &MleOptions) -> MleOutcome {
    let rho = 1.0 - opts.eps_ball;
    let project = |v: Vector3<f64>| -> Vector3<f64> {
        let r = v.norm();
        if r <= rho {
            v
        } else {
            v * (rho / r)
        }
    };
    let mut x = project(Vector3::from(init));
    let mut warning = false;
    let (mut f, _, _) = lik.value_grad_hess(&x);

    for _ in 0..opts.max_iter {
        let (f0, g, h) = lik.value_grad_hess(&x);
        f = f0;
        let r = x.norm();
        let on_sphere = r >= rho * (1.0 - 1e-12) && g.dot(&x) > 0.0;

        let accepted = if on_sphere {
            let n = x / r;
            let mu = g.dot(&n) / rho;
            let (t1, t2) = tangent_basis(&n);
            let gt = Vector2::new(g.dot(&t1), g.dot(&t2));
            if gt.norm() <= 1e-12 * (1.0 + g.norm()) {
                break;
            }
            let hl = h - Matrix3::identity() * mu;
            let a = Matrix2::new(t1.dot(&(hl * t1)), t1.dot(&(hl * t2)), t2.dot(&(hl * t1)), t2.dot(&(hl * t2)));
            let step2 = match (-a).cholesky() {
                Some(c) => c.solve(&gt),
                None => gt / (1.0 + h.norm()),
            };
            let dir = t1 * step2[0] + t2 * step2[1];
            let slope = g.dot(&dir);
            let mut alpha = 1.0;
            let mut ok = None;
            for _ in 0..40 {
                let cand = (x + dir * alpha).normalize() * rho;
                let fc = lik.value(&cand);
                if fc >= f + 1e-4 * alpha * slope {
                    ok = Some((cand, fc));
                    break;
                }
                alpha *= 0.5;
            }
            ok
        } else {
            let neg = -h;
            let mut delta = 1e-12 * (1.0 + neg.trace());
            let dir = loop {
                if let Some(c) = (neg + Matrix3::identity() * delta).cholesky() {
                    break c.solve(&g);
                }
                delta *= 10.0;
            };
            let decrement = g.dot(&dir);
            if decrement <= 1e-22 * (1.0 + lik.len() as f64) {
                break;
            }
            let mut alpha = 1.0;
            let mut ok = None;
            for _ in 0..40 {
                let cand = project(x + dir * alpha);
                let fc = lik.value(&cand);
                if fc >= f + 1e-4 * g.dot(&(cand - x)) {
                    ok = Some((cand, fc));
                    break;
                }
                alpha *= 0.5;
            }
            if ok.is_none() {
                // Projected gradient fallback.
                let mut alpha = 1.0 / (1.0 + neg.norm());
                for _ in 0..40 {
                    let cand = project(x + g * alpha);
                    let fc = lik.value(&cand);
                    if fc >= f + 1e-4 * g.dot(&(cand - x)) && fc > f {
                        ok = Some((cand, fc));
                        break;
                    }
                    alpha *= 0.5;
                }
            }
            ok
        };

        match accepted {
            Some((cand, fc)) => {
                let moved = (cand - x).norm();
                let gain = fc - f;
                x = cand;
                f = fc;
                if moved < 1e-15 || gain.abs() <= 1e-16 * (1.0 + f.abs()) && moved < 1e-10 {
                    break;
                }
            }
            None => {
                // No ascent direction left at working precision; a large
                // gradient here means the search genuinely stalled.
                let (_, g, _) = lik.value_grad_hess(&x);
                let tangential = if x.norm() >= rho * (1.0 - 1e-12) {
                    let n = x.normalize();
                    (g - n * g.dot(&n)).norm()
                } else {
                    g.norm()
                };
                warning = tangential > 1e-6 * (1.0 + lik.len() as f64);
                break;
            }
        }
    }
    MleOutcome { x: [x[0], x[1], x[2]], log_likelihood: f, warning }
}

/// [`mle_maximize`] from `init` plus `restarts` random starts; returns the best
/// and flags a warning if the maximizers disagree by more than 1e-5.
pub fn mle_multistart<R: Rng + ?Sized>(
    lik: &LogLikelihood,
    init: [f64; 3],
    opts: &MleOptions,
    restarts: usize,
    rng: &mut R,
) -> MleOutcome {
    let mut best = mle_maximize(lik, init, opts);
    let mut results = vec![best];
    for _ in 0..restarts {
        let start = random_ball_point(rng, 0.9 * (1.0 - opts.eps_ball));
        let out = mle_maximize(lik, start, opts);
        if out.log_likelihood > best.log_likelihood {
            best = out;
        }
        results.push(out);
    }
    let spread = results.iter().map(|o| (Vector3::from(o.x) - Vector3::from(best.x)).norm()).fold(0.0, f64::max);
    best.warning = results.iter().any(|o| o.warning) || spread > 1e-5;
    best
}

fn random_ball_point<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> [f64; 3] {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if v.norm() <= 1.0 {
            let v = v * radius;
            return [v[0], v[1], v[2]];
        }
    }
}

/// Optimal random measurement for `weight` at the estimate `x`.
pub fn adaptive_measurement(x: &StokesPoint, weight: &WeightSelector) -> Result<Povm, SimError> {
    let d = qubit_slds(x);
    let j = qubit_qfi(x);
    let h = weight.resolve(x);
    optimal_measurement(&d, &j, &h)?.measurement.ok_or_else(|| SimError::Config("optimal measurement missing".into()))
}

/// One adaptive estimation run.
///
/// At step `m` the optimal measurement for the weight at `x̂^{(m−1)}` is applied
/// (re-derived every `adapt_update_every` steps), one outcome is drawn from
/// `τ_{x0}`, and the MLE over the whole history is warm-started at the
/// previous estimate.
pub fn adaptive_run<R: Rng + ?Sized>(cfg: &RunConfig, rng: &mut R) -> Result<TrialRecord, SimError> {
    cfg.validate()?;
    let truth = qubit_state(&cfg.x0);
    let checkpoints = cfg.checkpoints();
    let opts = MleOptions { eps_ball: cfg.eps_ball, ..MleOptions::default() };
    let every = cfg.adapt_update_every;

    let mut xhat = clamp_to_ball(cfg.initial, cfg.eps_ball);
    let mut lik = LogLikelihood::default();
    let mut record = TrialRecord::default();
    let mut current: Option<(Povm, Vec<f64>)> = None;
    let mut next_checkpoint = 0;

    for m in 1..=cfg.m_max {
        if (m - 1) % every == 0 || current.is_none() {
            let at = clamp_to_ball(xhat.coords(), cfg.measure_margin);
            let povm = adaptive_measurement(&at, &cfg.weight)?;
            let probs = outcome_distribution(&truth, &povm)?;
            current = Some((povm, probs));
        }
        let (povm, probs) = current.as_ref().expect("measurement set above");
        let n = sample_index(probs, rng);
        let element = &povm.elements()[n];
        let applied = AppliedElement { op: element.op.clone(), label: element.label.clone() };
        lik.push(&applied);
        record.applied.push(applied);

        let at_checkpoint = checkpoints.get(next_checkpoint) == Some(&m);
        if m % every == 0 || at_checkpoint {
            let out = if cfg.mle_restarts > 0 && m % RESTART_PERIOD == 0 {
                mle_multistart(&lik, xhat.coords(), &opts, cfg.mle_restarts, rng)
            } else {
                mle_maximize(&lik, xhat.coords(), &opts)
            };
            if out.warning {
                record.opt_warnings += 1;
            }
            xhat = clamp_to_ball(out.x, cfg.eps_ball);
        }
        if at_checkpoint {
            record.estimates.push(Checkpoint { m, estimate: xhat.coords() });
            next_checkpoint += 1;
        }
    }
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Tomography,
    Adaptive,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Tomography => "tomography",
            EstimatorKind::Adaptive => "adaptive",
        }
    }

    fn stream_offset(&self) -> u64 {
        match self {
            EstimatorKind::Tomography => 0,
            EstimatorKind::Adaptive => 1,
        }
    }
}

/// Independent random stream of trial `index`.
pub fn trial_rng(seed: u64, kind: EstimatorKind, index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(2 * index as u64 + kind.stream_offset());
    rng
}

/// Checkpointed estimates of one trial (clamped into the ball).
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub checkpoints: Vec<Checkpoint>,
    /// Raw (unclamped) estimate at the final step.
    pub raw_final: [f64; 3],
    pub opt_warnings: usize,
}

fn tomography_trial(cfg: &RunConfig, rng: &mut ChaCha20Rng) -> TrialOutcome {
    let probs = tomography_probabilities(&cfg.x0);
    let mut counts = TomographyCounts::default();
    let mut checkpoints = Vec::new();
    let schedule = cfg.checkpoints();
    let mut next = 0;
    for m in 1..=cfg.m_max {
        counts.record(sample_index(&probs, rng));
        if schedule.get(next) == Some(&m) {
            let est = clamp_to_ball(counts.estimate(), cfg.eps_ball);
            checkpoints.push(Checkpoint { m, estimate: est.coords() });
            next += 1;
        }
    }
    TrialOutcome { checkpoints, raw_final: counts.estimate(), opt_warnings: 0 }
}

fn adaptive_trial(cfg: &RunConfig, rng: &mut ChaCha20Rng) -> Result<TrialOutcome, SimError> {
    let record = adaptive_run(cfg, rng)?;
    let raw_final = record.estimates.last().map(|c| c.estimate).unwrap_or(cfg.initial);
    Ok(TrialOutcome { checkpoints: record.estimates, raw_final, opt_warnings: record.opt_warnings })
}

/// Number of worker threads: the explicit request, else `QEST_THREADS`, else rayon's default.
pub fn thread_count(requested: Option<usize>) -> Option<usize> {
    requested.or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok())).filter(|n| *n > 0)
}

/// Runs `cfg.reps` independent trials of one estimator, in parallel.
pub fn run_trials(cfg: &RunConfig, kind: EstimatorKind, threads: Option<usize>) -> Result<Vec<TrialOutcome>, SimError> {
    cfg.validate()?;
    let work = || {
        (0..cfg.reps)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(cfg.seed, kind, i);
                match kind {
                    EstimatorKind::Tomography => Ok(tomography_trial(cfg, &mut rng)),
                    EstimatorKind::Adaptive => adaptive_trial(cfg, &mut rng),
                }
            })
            .collect::<Result<Vec<_>, SimError>>()
    };
    match thread_count(threads) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| SimError::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Aggregated figures of merit of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct McSummary {
    pub estimator: EstimatorKind,
    pub checkpoints: Vec<usize>,
    /// Mean of `2m B(τ_{x0}, τ_{x̂^{(m)}})`.
    pub mean_bures: Vec<f64>,
    pub se_bures: Vec<f64>,
    /// Mean of `m |x0 − x̂^{(m)}|²`.
    pub mean_sq: Vec<f64>,
    pub se_sq: Vec<f64>,
    /// `(Tr R)²` at `x0` for the configured weight.
    pub theoretical_opt: f64,
    /// `Tr H g(M^(T))⁻¹` at `x0`.
    pub theoretical_tomo: f64,
    pub reps: usize,
    pub opt_warnings: usize,
    pub total_steps: usize,
}

/// Theoretical limits `(c, c^(T))` at `x0` for a weight selector.
pub fn theoretical_limits(x0: &StokesPoint, weight: &WeightSelector) -> Result<(f64, f64), SimError> {
    let h = weight.resolve(x0);
    let j = qubit_qfi(x0);
    let c_opt = qcr_min_trace(&j, &h, 2)?.bound;
    let g = classical_fisher(&qubit_slds(x0), &qubit_tomography_povm())?;
    Ok((c_opt, weighted_trace_inverse(&h, &g)?))
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Deterministic reduction over trials in index order.
pub fn summarize(cfg: &RunConfig, kind: EstimatorKind, trials: &[TrialOutcome]) -> Result<McSummary, SimError> {
    let truth = qubit_state(&cfg.x0);
    let x0 = cfg.x0.vector();
    let checkpoints = cfg.checkpoints();
    let k = checkpoints.len();
    let mut bures = vec![Vec::with_capacity(trials.len()); k];
    let mut sq = vec![Vec::with_capacity(trials.len()); k];
    for t in trials {
        for (c, cp) in t.checkpoints.iter().enumerate() {
            let m = cp.m as f64;
            let est = StokesPoint::new(cp.estimate)?;
            bures[c].push(2.0 * m * bures_distance(&truth, &qubit_state(&est))?);
            sq[c].push(m * (x0 - est.vector()).norm_squared());
        }
    }
    let (mean_bures, se_bures) = bures.iter().map(|v| mean_and_se(v)).unzip();
    let (mean_sq, se_sq) = sq.iter().map(|v| mean_and_se(v)).unzip();
    let (theoretical_opt, theoretical_tomo) = theoretical_limits(&cfg.x0, &cfg.weight)?;
    Ok(McSummary {
        estimator: kind,
        checkpoints,
        mean_bures,
        se_bures,
        mean_sq,
        se_sq,
        theoretical_opt,
        theoretical_tomo,
        reps: trials.len(),
        opt_warnings: trials.iter().map(|t| t.opt_warnings).sum(),
        total_steps: trials.len() * cfg.m_max,
    })
}

/// Runs every requested estimator and summarizes each.
pub fn monte_carlo(
    cfg: &RunConfig,
    kinds: &[EstimatorKind],
    threads: Option<usize>,
) -> Result<Vec<McSummary>, SimError> {
    kinds
        .iter()
        .map(|&kind| {
            let trials = run_trials(cfg, kind, threads)?;
            summarize(cfg, kind, &trials)
        })
        .collect()
}

/// Shortest representation that parses back to the same `f64`, in exponent
/// form for very small or very large magnitudes.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub const CSV_HEADER: &str = "m,estimator,meanBures,seBures,meanSq,seSq,cOpt,cTomo";

/// CSV with columns `m, estimator, meanBures, seBures, meanSq, seSq, cOpt, cTomo`.
/// Numbers use the shortest representation that parses back exactly.
pub fn summaries_to_csv(summaries: &[McSummary]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in summaries {
        for i in 0..s.checkpoints.len() {
            let nums =
                [s.mean_bures[i], s.se_bures[i], s.mean_sq[i], s.se_sq[i], s.theoretical_opt, s.theoretical_tomo];
            let cells: Vec<String> = nums.iter().map(|v| format_number(*v)).collect();
            let _ = writeln!(out, "{},{},{}", s.checkpoints[i], s.estimator.name(), cells.join(","));
        }
    }
    out
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub m: usize,
    pub estimator: String,
    pub values: [f64; 6],
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<CsvRow>, SimError> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(SimError::Config("unexpected CSV header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(SimError::Config(format!("bad CSV row '{line}'")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| SimError::Config(format!("{s}: {e}")));
            Ok(CsvRow {
                m: fields[0].parse().map_err(|e| SimError::Config(format!("{}: {e}", fields[0])))?,
                estimator: fields[1].to_string(),
                values: [
                    num(fields[2])?,
                    num(fields[3])?,
                    num(fields[4])?,
                    num(fields[5])?,
                    num(fields[6])?,
                    num(fields[7])?,
                ],
            })
        })
        .collect()
}
