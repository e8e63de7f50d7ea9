//! Randomised checks of the discrete identities and inequalities the
//! stability analysis rests on, and empirical embedding constants.
//!
//! Each check draws its trial inputs from a ChaCha8 stream keyed by
//! `(seed, trial)`, so reports do not depend on how trials are scheduled.
//! Violations are normalised slacks: negative means the claim failed by that
//! relative amount.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{PfcError, Result};
use crate::grid::{self, GridSpec, RealField, StaggeredField};
use crate::par;
use crate::scheme::{Trace, TraceRecord};
use crate::spectral::{lowpass_with, DiagOp, SpectralOps, Transform};

/// Tolerance for equality-type claims (relative).
pub const EQUALITY_TOL: f64 = 1e-11;
/// Tolerance for inequality-type claims (slack relative to `max(|lhs|, |rhs|) + 1`).
pub const INEQUALITY_TOL: f64 = 1e-10;
/// Tolerance for the summation-by-parts identities.
pub const SBP_TOL: f64 = 1e-12;
/// Slack tolerance for the cubic gradient bound.
pub const NONLINEAR_TOL: f64 = 1e-12;
/// Allowed per-step energy increase, relative to `1 + |E|`.
pub const ENERGY_TOL: f64 = 1e-11;

/// Outcome of one claim over all trials.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub trials: usize,
    /// Most negative normalised slack seen; 0 if never violated.
    pub worst_violation: f64,
    /// Seed of the trial that produced `worst_violation`.
    pub worst_input_seed: u64,
    pub tolerance: f64,
    pub passed: bool,
    /// First failing step, for checks over a time trace.
    pub first_failure: Option<usize>,
}

impl CheckReport {
    fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            trials: 0,
            worst_violation: 0.0,
            worst_input_seed: 0,
            tolerance,
            passed: true,
            first_failure: None,
        }
    }

    fn record(&mut self, violation: f64, seed: u64) {
        self.trials += 1;
        if violation < self.worst_violation || violation.is_nan() && !self.worst_violation.is_nan() {
            self.worst_violation = violation;
            self.worst_input_seed = seed;
        }
        self.passed = self.worst_violation >= -self.tolerance;
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "check={} trials={} worst_violation={:e} worst_seed={} tolerance={:e} passed={}",
            self.name, self.trials, self.worst_violation, self.worst_input_seed, self.tolerance, self.passed
        )?;
        if let Some(step) = self.first_failure {
            write!(f, " first_failure={step}")?;
        }
        Ok(())
    }
}

/// Whether every report passed.
pub fn all_passed(reports: &[CheckReport]) -> bool {
    reports.iter().all(|r| r.passed)
}

/// `min(0, lhs − rhs) / (max(|lhs|, |rhs|) + 1)` for a claim `lhs ≥ rhs`.
pub fn inequality_slack(lhs: f64, rhs: f64) -> f64 {
    let d = lhs - rhs;
    if d.is_nan() {
        return f64::NAN;
    }
    d.min(0.0) / (lhs.abs().max(rhs.abs()) + 1.0)
}

/// `−|a − b| / max(|a|, |b|)`, or 0 when both vanish.
pub fn equality_slack(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        -(a - b).abs() / m
    }
}

/// `−|a − b| / magnitude` where `magnitude` bounds both sides.
fn residual_slack(a: f64, b: f64, magnitude: f64) -> f64 {
    if magnitude == 0.0 {
        -(a - b).abs()
    } else {
        -(a - b).abs() / magnitude
    }
}

/// Seed of trial `trial` under the master `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(trial as u64)
}

/// Random generator for a trial seed.
pub fn trial_rng(trial_seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed)
}

/// Trial input: band-limited (cutoff `N/4`) on even trials, full-spectrum
/// noise on odd ones.
pub fn trial_field(t: &Transform, rng: &mut ChaCha8Rng, trial: usize) -> RealField {
    let spec = *t.spec();
    let f = RealField::random(spec, rng);
    if trial % 2 == 0 {
        lowpass_with(t, &f, (spec.n() / 4).max(1))
    } else {
        f
    }
}

/// Runs `trials` independent trials, each returning one slack per claim,
/// and folds them into reports in trial order.
fn sweep<F>(names: &[&str], tols: &[f64], seed: u64, trials: usize, f: F) -> Vec<CheckReport>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Vec<f64> + Sync + Send,
{
    let results = par::map_range(trials, |trial| {
        let s = trial_seed(seed, trial);
        let mut rng = trial_rng(s);
        (s, f(trial, &mut rng))
    });
    let mut reports: Vec<CheckReport> = names.iter().zip(tols).map(|(n, &t)| CheckReport::new(*n, t)).collect();
    for (s, slacks) in results {
        for (r, v) in reports.iter_mut().zip(slacks) {
            r.record(v, s);
        }
    }
    reports
}

fn need_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        Err(PfcError::InvalidArgument("trials must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Random staggered field with the given components scale.
fn random_staggered(spec: GridSpec, rng: &mut ChaCha8Rng) -> StaggeredField {
    let comps = (0..spec.dim()).map(|_| RealField::random(spec, rng).into_values()).collect();
    StaggeredField::from_components(spec, comps).expect("component lengths match the grid")
}

fn sbp_magnitude(a: f64, b: f64) -> f64 {
    a.max(b)
}

/// The five summation-by-parts identities, one report each:
///
/// ```text
/// ⟨ψ, ∇·f⟩ = −⟨∇ψ, f⟩            ⟨ψ, Δφ⟩ = −⟨∇ψ, ∇φ⟩
/// ⟨ψ, Δ²φ⟩ = ⟨Δψ, Δφ⟩            ⟨Δψ, Δ²φ⟩ = −⟨∇ψ, ∇Δ²φ⟩
/// ⟨Δ³ψ, Δ²φ⟩ = −⟨∇Δ²ψ, ∇Δ²φ⟩
/// ```
///
/// Residuals are measured against `‖a‖‖b‖` of the pairings involved, since
/// the inner products of random fields may nearly cancel.
pub fn check_sbp(spec: GridSpec, seed: u64, trials: usize) -> Result<Vec<CheckReport>> {
    need_trials(trials)?;
    let t = Transform::new(spec);
    let names = ["sbp_div", "sbp_lap", "sbp_bilap", "sbp_lap_bilap", "sbp_tri_bilap"];
    Ok(sweep(&names, &[SBP_TOL; 5], seed, trials, |trial, rng| {
        let psi = trial_field(&t, rng, trial);
        let phi = trial_field(&t, rng, trial + 1);
        let w = trial_field(&t, rng, trial);
        let noise = random_staggered(spec, rng);
        let vf = grid::grad(&w).lin_comb(1.0, &noise, 1.0);

        let n2 = |f: &RealField| grid::norm2(f);
        let sn = |v: &StaggeredField| grid::staggered_inner_unchecked(v, v).sqrt();

        let g_psi = grid::grad(&psi);
        let a1 = grid::inner_unchecked(&psi, &grid::divergence(&vf));
        let b1 = -grid::staggered_inner_unchecked(&g_psi, &vf);
        let m1 = sbp_magnitude(n2(&psi) * n2(&grid::divergence(&vf)), sn(&g_psi) * sn(&vf));

        let lap_phi = grid::laplacian(&phi);
        let g_phi = grid::grad(&phi);
        let a2 = grid::inner_unchecked(&psi, &lap_phi);
        let b2 = -grid::staggered_inner_unchecked(&g_psi, &g_phi);
        let m2 = sbp_magnitude(n2(&psi) * n2(&lap_phi), sn(&g_psi) * sn(&g_phi));

        let lap_psi = grid::laplacian(&psi);
        let bi_phi = grid::laplacian(&lap_phi);
        let a3 = grid::inner_unchecked(&psi, &bi_phi);
        let b3 = grid::inner_unchecked(&lap_psi, &lap_phi);
        let m3 = sbp_magnitude(n2(&psi) * n2(&bi_phi), n2(&lap_psi) * n2(&lap_phi));

        let g_bi_phi = grid::grad(&bi_phi);
        let a4 = grid::inner_unchecked(&lap_psi, &bi_phi);
        let b4 = -grid::staggered_inner_unchecked(&g_psi, &g_bi_phi);
        let m4 = sbp_magnitude(n2(&lap_psi) * n2(&bi_phi), sn(&g_psi) * sn(&g_bi_phi));

        let bi_psi = grid::laplacian(&lap_psi);
        let tri_psi = grid::laplacian(&bi_psi);
        let g_bi_psi = grid::grad(&bi_psi);
        let a5 = grid::inner_unchecked(&tri_psi, &bi_phi);
        let b5 = -grid::staggered_inner_unchecked(&g_bi_psi, &g_bi_phi);
        let m5 = sbp_magnitude(n2(&tri_psi) * n2(&bi_phi), sn(&g_bi_psi) * sn(&g_bi_phi));

        vec![
            residual_slack(a1, b1, m1),
            residual_slack(a2, b2, m2),
            residual_slack(a3, b3, m3),
            residual_slack(a4, b4, m4),
            residual_slack(a5, b5, m5),
        ]
    }))
}

/// `‖G⁽⁰⁾∇_h Δ_h^k f‖₂²` by Parseval: `L^d Σ φ₁(τΛ) λ^{2k+1} |f̂|²`.
pub fn g0_grad_norm_sq(ops: &SpectralOps, f: &RealField, k: usize) -> Result<f64> {
    let c = ops.dft(f)?;
    let t = ops.table();
    let (lam, big) = (t.lambda(), t.big_lambda());
    let tau = t.tau();
    Ok(c.weighted_energy(|i| DiagOp::Phi1.multiplier(lam[i], big[i], tau) * lam[i].powi(2 * k as i32 + 1)))
}

/// `‖G⁽⁰⁾∇_h Δ_h^k f‖₂²` by forming `G⁽⁰⁾Δ_h^k f` and differencing it on the grid.
pub fn g0_grad_norm_sq_materialized(ops: &SpectralOps, f: &RealField, k: usize) -> Result<f64> {
    let g = ops.apply(&grid::laplacian_pow(f, k), DiagOp::G0)?;
    Ok(grid::grad_norm_sq(&g))
}

fn check_kappa_tau(kappa: f64, tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(PfcError::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(PfcError::InvalidArgument(format!("kappa must be nonnegative, got {kappa}")));
    }
    Ok(())
}

/// Per-field quantities shared by the G-operator claims.
#[derive(Clone, Copy, Debug)]
pub struct Prop1Sides {
    /// `‖G⁽⁰⁾∇Δf‖₂` and `‖G⁽⁰⁾Δf‖₂^{2/3} ‖G⁽⁰⁾∇Δ²f‖₂^{1/3}`.
    pub interp: (f64, f64),
    /// `‖Δf‖₂²` and `τ‖G⁽⁵⁾f‖₂²`.
    pub lap_vs_g5: (f64, f64),
    /// `⟨G L_κ f, Δ²f⟩` and `‖G⁽⁵⁾f‖₂²`.
    pub identity: (f64, f64),
    /// `‖G⁽⁵⁾f‖₂²` and `½‖G⁽⁰⁾∇Δ²f‖₂² + (κ−1)‖G⁽⁰⁾∇Δf‖₂²`.
    pub lower: (f64, f64),
    /// `⟨G L_κ f, Δ² e^{−τL_κ} f⟩` and `‖G⁽⁵⁾ e^{−τL_κ} f‖₂²`.
    pub decayed: (f64, f64),
    /// `(‖f‖, ‖G⁽⁰⁾f‖)`, `(‖G⁽⁰⁾f‖, ‖G⁽³⁾f‖)`, `(‖f‖/√2, ‖G⁽³⁾f‖)`, `(‖f‖, ‖G⁽⁴⁾f‖)`.
    pub op_norms: [(f64, f64); 4],
}

/// Evaluates both sides of every G-operator claim for one field.
pub fn prop1_sides(ops: &SpectralOps, f: &RealField) -> Result<Prop1Sides> {
    let kappa = ops.table().kappa();
    let tau = ops.table().tau();
    let a2 = ops.quadratic_form(f, &[DiagOp::G, DiagOp::Biharmonic])?;
    let a3 = g0_grad_norm_sq(ops, f, 1)?;
    let a5 = g0_grad_norm_sq(ops, f, 2)?;
    let g5 = ops.quadratic_form(f, &[DiagOp::G5, DiagOp::G5])?;

    let glf = ops.apply_chain(f, &[DiagOp::G, DiagOp::LKappa])?;
    let pairing = grid::inner_unchecked(&glf, &grid::laplacian_pow(f, 2));
    let ef = ops.apply(f, DiagOp::Exp)?;
    let pairing_decayed = grid::inner_unchecked(&glf, &grid::laplacian_pow(&ef, 2));
    let g5_decayed = ops.quadratic_form(&ef, &[DiagOp::G5, DiagOp::G5])?;

    let n = grid::norm2(f);
    let n0 = grid::norm2(&ops.apply(f, DiagOp::G0)?);
    let n3 = grid::norm2(&ops.apply(f, DiagOp::G3)?);
    let n4 = grid::norm2(&ops.apply(f, DiagOp::G4)?);
    Ok(Prop1Sides {
        interp: (a3.sqrt(), a2.cbrt() * a5.powf(1.0 / 6.0)),
        lap_vs_g5: (grid::norm2_sq(&grid::laplacian(f)), tau * g5),
        identity: (pairing, g5),
        lower: (g5, 0.5 * a5 + (kappa - 1.0) * a3),
        decayed: (pairing_decayed, g5_decayed),
        op_norms: [(n, n0), (n0, n3), (n / 2f64.sqrt(), n3), (n, n4)],
    })
}

pub const PROP1_CLAIMS: [&str; 9] = [
    "prop1_interpolation",
    "prop1_laplacian_g5",
    "prop1_identity",
    "prop1_lower_bound",
    "prop1_decayed",
    "prop1_g0_contraction",
    "prop1_g3_below_g0",
    "prop1_g3_half",
    "prop1_g4_contraction",
];

/// The G-operator estimates on random mean-zero fields, one report per claim.
/// Requires `κ ≥ 1`.
pub fn check_prop1(spec: GridSpec, kappa: f64, tau: f64, seed: u64, trials: usize) -> Result<Vec<CheckReport>> {
    check_kappa_tau(kappa, tau)?;
    if kappa < 1.0 {
        return Err(PfcError::InvalidArgument(format!(
            "prop1 requires kappa >= 1 (got {kappa}); the estimates are only claimed under that assumption"
        )));
    }
    need_trials(trials)?;
    let ops = SpectralOps::build(spec, kappa, tau)?;
    let mut tols = [INEQUALITY_TOL; 9];
    tols[2] = EQUALITY_TOL;
    Ok(sweep(&PROP1_CLAIMS, &tols, seed, trials, |trial, rng| {
        let f = trial_field(ops.transform(), rng, trial).mean_free();
        let s = prop1_sides(&ops, &f).expect("field on the ops grid");
        let mut v = vec![
            inequality_slack(s.interp.1, s.interp.0),
            inequality_slack(s.lap_vs_g5.0, s.lap_vs_g5.1),
            equality_slack(s.identity.0, s.identity.1),
            inequality_slack(s.lower.0, s.lower.1),
            inequality_slack(s.decayed.0, s.decayed.1),
        ];
        v.extend(s.op_norms.iter().map(|&(big, small)| inequality_slack(big, small)));
        v
    }))
}

/// Sides of `τ⟨G L_κ f, Δ² e^{−τL_κ} f⟩ + ‖Δ(g − e^{−τL_κ} f)‖₂² ≥ τ‖G⁽⁵⁾g‖₂²`
/// together with the intermediate `τ‖G⁽⁵⁾e^{−τL_κ}f‖₂² + τ‖G⁽⁵⁾(g − e^{−τL_κ}f)‖₂²`.
#[derive(Clone, Copy, Debug)]
pub struct Prop2Sides {
    pub lhs: f64,
    pub rhs: f64,
    pub middle: f64,
}

pub fn prop2_sides(ops: &SpectralOps, f: &RealField, g: &RealField) -> Result<Prop2Sides> {
    let tau = ops.table().tau();
    let ef = ops.apply(f, DiagOp::Exp)?;
    let glf = ops.apply_chain(f, &[DiagOp::G, DiagOp::LKappa])?;
    let pairing = grid::inner_unchecked(&glf, &grid::laplacian_pow(&ef, 2));
    let d = g.sub(&ef);
    let lhs = tau * pairing + grid::norm2_sq(&grid::laplacian(&d));
    let g5 = [DiagOp::G5, DiagOp::G5];
    let rhs = tau * ops.quadratic_form(g, &g5)?;
    let middle = tau * (ops.quadratic_form(&ef, &g5)? + ops.quadratic_form(&d, &g5)?);
    Ok(Prop2Sides { lhs, rhs, middle })
}

pub const PROP2_CLAIMS: [&str; 6] = [
    "prop2_random_pair",
    "prop2_g_decayed_f",
    "prop2_g_equals_f",
    "prop2_f_zero",
    "prop2_remark_split",
    "prop2_remark_half",
];

/// The two-function estimate on independent random pairs and on the structured cases
/// `g = e^{−τL_κ}f`, `g = f`, `f = 0`, plus the two steps of the weaker
/// bound `≥ ½τ‖G⁽⁵⁾g‖₂²`. Valid for every `κ ≥ 0`.
pub fn check_prop2(spec: GridSpec, kappa: f64, tau: f64, seed: u64, trials: usize) -> Result<Vec<CheckReport>> {
    check_kappa_tau(kappa, tau)?;
    need_trials(trials)?;
    let ops = SpectralOps::build(spec, kappa, tau)?;
    Ok(sweep(&PROP2_CLAIMS, &[INEQUALITY_TOL; 6], seed, trials, |trial, rng| {
        let f = trial_field(ops.transform(), rng, trial);
        let g = trial_field(ops.transform(), rng, trial + 1);
        let ef = ops.apply(&f, DiagOp::Exp).expect("field on the ops grid");
        let zero = RealField::zeros(spec);
        let p = |f: &RealField, g: &RealField| prop2_sides(&ops, f, g).expect("field on the ops grid");
        let random = p(&f, &g);
        let decayed = p(&f, &ef);
        let same = p(&f, &f);
        let fzero = p(&zero, &g);
        vec![
            inequality_slack(random.lhs, random.rhs),
            inequality_slack(decayed.lhs, decayed.rhs),
            inequality_slack(same.lhs, same.rhs),
            inequality_slack(fzero.lhs, fzero.rhs),
            inequality_slack(random.lhs, random.middle),
            inequality_slack(random.middle, 0.5 * random.rhs),
        ]
    }))
}

/// `(‖∇_h(f³)‖₂, 3‖f‖∞²‖∇_h f‖₂)`.
pub fn cubic_gradient_sides(f: &RealField) -> (f64, f64) {
    let lhs = grid::grad_norm_sq(&f.cube()).sqrt();
    let m = f.max_abs();
    (lhs, 3.0 * m * m * grid::grad_norm_sq(f).sqrt())
}

/// `‖∇_h(f³)‖₂ ≤ 3‖f‖∞²‖∇_h f‖₂` on random fields whose amplitude cycles
/// through 0.1, 1 and 10.
pub fn check_nonlinear_bounds(spec: GridSpec, seed: u64, trials: usize) -> Result<CheckReport> {
    need_trials(trials)?;
    let t = Transform::new(spec);
    let mut reports = sweep(&["nonlinear_cubic_gradient"], &[NONLINEAR_TOL], seed, trials, |trial, rng| {
        let amp = [0.1, 1.0, 10.0][trial % 3];
        let f = trial_field(&t, rng, trial / 3).scaled(amp);
        let (lhs, rhs) = cubic_gradient_sides(&f);
        vec![inequality_slack(rhs, lhs)]
    });
    Ok(reports.remove(0))
}

/// Sample maxima of the embedding ratios.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmbeddingEstimate {
    /// `max ‖f‖∞ / (|f̄| + ‖Δ_h f‖₂)`, a lower bound for `C₂`.
    pub c2: f64,
    /// `max ‖∇_h f‖₂ / ‖Δ_h f‖₂`, a lower bound for `C₃`.
    pub c3: f64,
    /// Nonconstant samples used.
    pub samples: usize,
}

/// `(‖f‖∞ / (|f̄| + ‖Δ_h f‖₂), ‖∇_h f‖₂ / ‖Δ_h f‖₂)`; `None` for constants.
pub fn embedding_ratios(f: &RealField) -> Option<(f64, f64)> {
    let lap = grid::norm2(&grid::laplacian(f));
    if lap == 0.0 {
        return None;
    }
    let r2 = f.max_abs() / (grid::mean(f).abs() + lap);
    let r3 = grid::grad_norm_sq(f).sqrt() / lap;
    Some((r2, r3))
}

/// Running maxima of the embedding ratios over `fields`.
pub fn estimate_from_fields<'a>(fields: impl IntoIterator<Item = &'a RealField>) -> Result<EmbeddingEstimate> {
    let mut est = EmbeddingEstimate { c2: 0.0, c3: 0.0, samples: 0 };
    for f in fields {
        if let Some((r2, r3)) = embedding_ratios(f) {
            est.c2 = est.c2.max(r2);
            est.c3 = est.c3.max(r3);
            est.samples += 1;
        }
    }
    if est.samples == 0 {
        return Err(PfcError::InvalidArgument("every sample field is constant".into()));
    }
    Ok(est)
}

/// Random smooth fields with random mean: a band-limited part at a cutoff
/// cycling through 1, 2, … , N/4 plus the offset.
pub fn embedding_sample(t: &Transform, seed: u64, trial: usize) -> RealField {
    let spec = *t.spec();
    let mut rng = trial_rng(trial_seed(seed, trial));
    let top = (spec.n() / 4).max(1);
    let cutoff = 1 + trial % top;
    let f = lowpass_with(t, &RealField::random(spec, &mut rng), cutoff);
    let offset = rand::Rng::random_range(&mut rng, -1.0..1.0);
    f.map(|x| x + offset)
}

/// Empirical lower bounds for `C₂`, `C₃` on `spec`.
pub fn estimate_embedding_constants(spec: GridSpec, seed: u64, trials: usize) -> Result<EmbeddingEstimate> {
    need_trials(trials)?;
    let t = Transform::new(spec);
    let fields = par::map_range(trials, |trial| embedding_sample(&t, seed, trial));
    estimate_from_fields(&fields)
}

fn trace_report(name: &str, tol: f64, records: &[TraceRecord], slack: impl Fn(usize) -> f64) -> CheckReport {
    let mut r = CheckReport::new(name, tol);
    for (i, rec) in records.iter().enumerate() {
        let v = slack(i);
        r.record(v, rec.step as u64);
        if (v < -tol || v.is_nan()) && r.first_failure.is_none() {
            r.first_failure = Some(rec.step);
        }
    }
    r
}

/// Energy decay, the κ condition on the realised stage maxima and the `H²`
/// bound along a run, one report each. `worst_input_seed` holds the step.
pub fn check_dissipation(trace: &Trace) -> Result<Vec<CheckReport>> {
    let recs = &trace.records;
    if recs.is_empty() {
        return Err(PfcError::InvalidArgument("empty trace".into()));
    }
    let eps = trace.epsilon;
    let steps = &recs[1..];
    let energy = trace_report("energy_decay", ENERGY_TOL, steps, |i| {
        let (prev, next) = (recs[i].energy.total, recs[i + 1].energy.total);
        (prev - next).min(0.0) / (1.0 + prev.abs())
    });
    let kappa = trace_report("kappa_condition", 0.0, steps, |i| {
        let r = &steps[i];
        match r.stage_max {
            Some(m) => (r.kappa - (3.0 * m * m - eps) / 2.0).min(0.0) / (1.0 + r.kappa.abs()),
            None => 0.0,
        }
    });
    let h2 = trace_report("h2_bound", 0.0, recs, |i| if recs[i].h2_bound_ok { 0.0 } else { -1.0 });
    Ok(vec![energy, kappa, h2])
}
