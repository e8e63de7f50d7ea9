//! The ETDRK2 stepper for `du/dt = −L_κ u + f_κ(u)` with
//! `L_κ = −Δ_h((I+Δ_h)² + κI)` and `f_κ(u) = Δ_h(u³) − (ε+κ)Δ_h u`:
//!
//! ```text
//! ũ^{n+1}  = φ₀(τL_κ) u^n + τ φ₁(τL_κ) f_κ(u^n)
//! u^{n+1}  = ũ^{n+1} + τ φ₂(τL_κ) (f_κ(ũ^{n+1}) − f_κ(u^n))
//! ```
//!
//! All linear operators are applied per Fourier mode; the cube is formed
//! pointwise on the grid. Also here: κ selection, the a priori constants
//! chain with its time-step bounds, and the run driver.

use log::warn;

use crate::energy::{self, EnergyBreakdown};
use crate::error::{PfcError, Result};
use crate::grid::{self, GridSpec, RealField};
use crate::par;
use crate::spectral::{build_symbols, DiagOp, SpectralCoeffs, SpectralOps};

/// How the stabilisation parameter κ is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KappaPolicy {
    /// User-supplied κ, used as is.
    Fixed(f64),
    /// `κ = max((3M² − ε)/2, 1)` with `M = ‖u⁰‖∞`, fixed for the run and
    /// checked against the realised stage maxima every step. With `strict`,
    /// [`run`] restarts from `u⁰` with an enlarged κ after a violation.
    LemmaAdaptive { strict: bool },
    /// `κ = max((3C̃₁₀² − ε)/2, 1)` from the constants chain with the given
    /// embedding constants `C₂`, `C₃`.
    Theory { c2: f64, c3: f64 },
}

/// Which parts of the explicit term `f_κ` are kept.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Forcing {
    /// `Δ_h(u³) − (ε+κ)Δ_h u`.
    #[default]
    Full,
    /// `−(ε+κ)Δ_h u` only: the cube is dropped.
    NoCube,
    /// `f_κ ≡ 0`: the scheme integrates `du/dt = −L_κ u` exactly.
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeParams {
    pub tau: f64,
    pub epsilon: f64,
    pub policy: KappaPolicy,
    /// κ in effect; replaced by the policy when a run starts.
    pub kappa: f64,
    pub forcing: Forcing,
}

impl SchemeParams {
    pub fn new(tau: f64, epsilon: f64, policy: KappaPolicy) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(PfcError::InvalidArgument(format!("tau must be positive, got {tau}")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(PfcError::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        let kappa = match policy {
            KappaPolicy::Fixed(k) => {
                if !(k.is_finite() && k >= 0.0) {
                    return Err(PfcError::InvalidArgument(format!("kappa must be nonnegative, got {k}")));
                }
                k
            }
            KappaPolicy::LemmaAdaptive { .. } => 1.0,
            KappaPolicy::Theory { c2, c3 } => {
                check_embedding(c2, c3)?;
                1.0
            }
        };
        Ok(Self { tau, epsilon, policy, kappa, forcing: Forcing::Full })
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = forcing;
        self
    }

    /// Copy with κ set; values below 1 are raised to 1 under the adaptive and
    /// theory policies.
    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = match self.policy {
            KappaPolicy::Fixed(_) => kappa,
            _ => kappa.max(1.0),
        };
        self
    }
}

fn check_embedding(c2: f64, c3: f64) -> Result<()> {
    if c2.is_finite() && c3.is_finite() && c2 > 0.0 && c3 > 0.0 {
        Ok(())
    } else {
        Err(PfcError::InvalidArgument(format!(
            "theory policy needs positive embedding constants C2, C3 (got {c2}, {c3})"
        )))
    }
}

/// `max((3M² − ε)/2, 1)`, the smallest admissible κ for a stage maximum `M`.
pub fn lemma_kappa(max_inf: f64, epsilon: f64) -> f64 {
    ((3.0 * max_inf * max_inf - epsilon) / 2.0).max(1.0)
}

/// Output of one full step.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub u_tilde: RealField,
    pub u_next: RealField,
}

/// The split `u* = e^{−τL_κ}u^n` followed by the explicit update.
#[derive(Clone, Debug)]
pub struct Substages {
    pub u_star: RealField,
    pub u_tilde: RealField,
    pub u_next: RealField,
}

/// ETDRK2 stepper with precomputed per-mode weights.
#[derive(Clone, Debug)]
pub struct Etdrk2 {
    params: SchemeParams,
    ops: SpectralOps,
    decay: Vec<f64>,
    tau_phi1: Vec<f64>,
    tau_phi2: Vec<f64>,
}

impl Etdrk2 {
    pub fn new(spec: GridSpec, params: SchemeParams) -> Result<Self> {
        let table = build_symbols(spec, params.kappa, params.tau)?;
        let tau = params.tau;
        let decay = table.multipliers(DiagOp::Exp);
        let tau_phi1 = table.multipliers(DiagOp::Phi1).into_iter().map(|m| tau * m).collect();
        let tau_phi2 = table.multipliers(DiagOp::Phi2).into_iter().map(|m| tau * m).collect();
        Ok(Self { params, ops: SpectralOps::new(table), decay, tau_phi1, tau_phi2 })
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn ops(&self) -> &SpectralOps {
        &self.ops
    }

    pub fn spec(&self) -> &GridSpec {
        self.ops.table().spec()
    }

    fn dft(&self, u: &RealField) -> SpectralCoeffs {
        self.ops.dft(u).expect("stepper planned for this grid")
    }

    fn idft(&self, c: &SpectralCoeffs) -> RealField {
        self.ops.idft(c).expect("stepper planned for this grid")
    }

    /// `f̂_κ(u) = −λ (FFT(u³) − (ε+κ) û)`.
    fn forcing_hat(&self, u: &RealField, u_hat: &SpectralCoeffs) -> SpectralCoeffs {
        let lambda = self.ops.table().lambda();
        let lin = self.params.epsilon + self.params.kappa;
        let mut out = match self.params.forcing {
            Forcing::Full => self.dft(&u.cube()),
            Forcing::NoCube | Forcing::Off => {
                SpectralCoeffs::from_vec(*u.spec(), vec![Default::default(); u.values().len()]).unwrap()
            }
        };
        if self.params.forcing == Forcing::Off {
            return out;
        }
        let src = u_hat.coeffs();
        par::for_each_chunk_mut(out.coeffs_mut(), par::CHUNK, |c, s| {
            for (o, v) in s.iter_mut().enumerate() {
                let i = c * par::CHUNK + o;
                *v = (*v - src[i] * lin) * -lambda[i];
            }
        });
        out
    }

    /// `f_κ(u)` with `Δ_h` applied through its symbol.
    pub fn f_kappa(&self, u: &RealField) -> RealField {
        self.idft(&self.forcing_hat(u, &self.dft(u)))
    }

    /// `f_κ(u)` with `Δ_h` applied by the finite-difference stencil.
    pub fn f_kappa_stencil(&self, u: &RealField) -> RealField {
        f_kappa_stencil(u, &self.params)
    }

    fn stage1_hat(&self, u_hat: &SpectralCoeffs, fu_hat: &SpectralCoeffs) -> SpectralCoeffs {
        let mut out = u_hat.clone();
        let f = fu_hat.coeffs();
        par::for_each_chunk_mut(out.coeffs_mut(), par::CHUNK, |c, s| {
            for (o, v) in s.iter_mut().enumerate() {
                let i = c * par::CHUNK + o;
                *v = *v * self.decay[i] + f[i] * self.tau_phi1[i];
            }
        });
        out
    }

    fn stage2_hat(&self, ut_hat: &SpectralCoeffs, fu_hat: &SpectralCoeffs, fut_hat: &SpectralCoeffs) -> SpectralCoeffs {
        let mut out = ut_hat.clone();
        let (fu, fut) = (fu_hat.coeffs(), fut_hat.coeffs());
        par::for_each_chunk_mut(out.coeffs_mut(), par::CHUNK, |c, s| {
            for (o, v) in s.iter_mut().enumerate() {
                let i = c * par::CHUNK + o;
                *v += (fut[i] - fu[i]) * self.tau_phi2[i];
            }
        });
        out
    }

    /// `ũ^{n+1} = φ₀(τL_κ)u^n + τφ₁(τL_κ) f_κ(u^n)`.
    pub fn stage1(&self, u_n: &RealField) -> RealField {
        let u_hat = self.dft(u_n);
        let fu = self.forcing_hat(u_n, &u_hat);
        self.idft(&self.stage1_hat(&u_hat, &fu))
    }

    /// `u^{n+1} = ũ^{n+1} + τφ₂(τL_κ)(f_κ(ũ^{n+1}) − f_κ(u^n))`.
    pub fn stage2(&self, u_n: &RealField, u_tilde: &RealField) -> RealField {
        let fu = self.forcing_hat(u_n, &self.dft(u_n));
        let ut_hat = self.dft(u_tilde);
        let fut = self.forcing_hat(u_tilde, &ut_hat);
        self.idft(&self.stage2_hat(&ut_hat, &fu, &fut))
    }

    /// The expanded form
    /// `φ₀u^n + τ((φ₁ − φ₂) f_κ(u^n) + φ₂ f_κ(ũ^{n+1}))` of the second stage.
    pub fn stage2_expanded(&self, u_n: &RealField, u_tilde: &RealField) -> RealField {
        let u_hat = self.dft(u_n);
        let fu = self.forcing_hat(u_n, &u_hat);
        let fut = self.forcing_hat(u_tilde, &self.dft(u_tilde));
        let mut out = u_hat;
        let (a, b) = (fu.coeffs(), fut.coeffs());
        par::for_each_chunk_mut(out.coeffs_mut(), par::CHUNK, |c, s| {
            for (o, v) in s.iter_mut().enumerate() {
                let i = c * par::CHUNK + o;
                *v = *v * self.decay[i] + a[i] * (self.tau_phi1[i] - self.tau_phi2[i]) + b[i] * self.tau_phi2[i];
            }
        });
        self.idft(&out)
    }

    /// One full step from `u^n`.
    pub fn step(&self, u_n: &RealField) -> StepOutput {
        let u_hat = self.dft(u_n);
        let fu = self.forcing_hat(u_n, &u_hat);
        let ut_hat = self.stage1_hat(&u_hat, &fu);
        let u_tilde = self.idft(&ut_hat);
        let fut = self.forcing_hat(&u_tilde, &ut_hat);
        let u_next = self.idft(&self.stage2_hat(&ut_hat, &fu, &fut));
        StepOutput { u_tilde, u_next }
    }

    /// Both stages written as `u* = e^{−τL_κ}u^n` plus an explicit increment.
    pub fn substage_split(&self, u_n: &RealField) -> Substages {
        let u_hat = self.dft(u_n);
        let fu = self.forcing_hat(u_n, &u_hat);
        let mut star_hat = u_hat.clone();
        star_hat.scale_by(|i| self.decay[i]);
        let u_star = self.idft(&star_hat);

        let mut inc1 = fu.clone();
        inc1.scale_by(|i| self.tau_phi1[i]);
        let u_tilde = u_star.add(&self.idft(&inc1));

        let ut_hat = self.dft(&u_tilde);
        let fut = self.forcing_hat(&u_tilde, &ut_hat);
        let mut inc2 = inc1;
        let (a, b) = (fu.coeffs(), fut.coeffs());
        par::for_each_chunk_mut(inc2.coeffs_mut(), par::CHUNK, |c, s| {
            for (o, v) in s.iter_mut().enumerate() {
                let i = c * par::CHUNK + o;
                *v += (b[i] - a[i]) * self.tau_phi2[i];
            }
        });
        let u_next = u_star.add(&self.idft(&inc2));
        Substages { u_star, u_tilde, u_next }
    }

    /// `(u* − u^n)/τ + L_κ φ₁(τL_κ) u^n`, which vanishes for `u* = e^{−τL_κ}u^n`.
    pub fn substage_residual(&self, u_n: &RealField, u_star: &RealField) -> RealField {
        let damped = self.ops.apply_chain(u_n, &[DiagOp::LKappa, DiagOp::Phi1]).expect("stepper planned for this grid");
        let tau = self.params.tau;
        u_star.sub(u_n).lin_comb(1.0 / tau, &damped, 1.0)
    }
}

/// `f_κ(u)` via the spectral path.
pub fn f_kappa(u: &RealField, params: &SchemeParams) -> Result<RealField> {
    Ok(Etdrk2::new(*u.spec(), *params)?.f_kappa(u))
}

/// `f_κ(u)` via the stencil path.
pub fn f_kappa_stencil(u: &RealField, params: &SchemeParams) -> RealField {
    let lin = params.epsilon + params.kappa;
    let g = match params.forcing {
        Forcing::Full => u.map(|x| x * x * x - lin * x),
        Forcing::NoCube => u.scaled(-lin),
        Forcing::Off => return RealField::zeros(*u.spec()),
    };
    grid::laplacian(&g)
}

pub fn stage1(u_n: &RealField, params: &SchemeParams) -> Result<RealField> {
    Ok(Etdrk2::new(*u_n.spec(), *params)?.stage1(u_n))
}

pub fn stage2(u_n: &RealField, u_tilde: &RealField, params: &SchemeParams) -> Result<RealField> {
    if u_n.spec() != u_tilde.spec() {
        return Err(PfcError::SpecMismatch("u^n and ũ^{n+1} live on different grids".into()));
    }
    Ok(Etdrk2::new(*u_n.spec(), *params)?.stage2(u_n, u_tilde))
}

pub fn substage_split(u_n: &RealField, params: &SchemeParams) -> Result<Substages> {
    Ok(Etdrk2::new(*u_n.spec(), *params)?.substage_split(u_n))
}

/// Explicit a priori bounds linking the initial energy to maximum-norm
/// bounds, the κ they justify, and the admissible time steps.
///
/// Naming follows the chain `C̃₀ … C̃₁₀`; there is no `C̃₇`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantChain {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c8: f64,
    pub c9: f64,
    pub c10: f64,
    pub beta0: f64,
    /// Embedding constant in `‖f‖∞ ≤ C₂(|f̄| + ‖Δ_h f‖₂)`.
    pub embed_c2: f64,
    /// Embedding constant in `‖∇_h f‖₂ ≤ C₃‖Δ_h f‖₂`.
    pub embed_c3: f64,
    pub volume: f64,
    pub epsilon: f64,
    pub kappa_theory: f64,
    /// `min{κ^{−3/2}, C₃^{−2}/32, C̃₃^{−2}/36, C̃₆^{−2}/12}` at `κ = kappa_theory`.
    pub tau_max: f64,
    /// The weaker first-stage bound `min{C₃^{−2}/16, C̃₃^{−2}/8}`.
    pub tau_max_stage1: f64,
}

impl ConstantChain {
    /// Time-step bound for an arbitrary κ.
    pub fn tau_max_for(&self, kappa: f64) -> f64 {
        let c3 = self.embed_c3;
        [
            kappa.powf(-1.5),
            1.0 / (32.0 * c3 * c3),
            1.0 / (36.0 * self.c3 * self.c3),
            1.0 / (12.0 * self.c6 * self.c6),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }

    /// `(key, value)` pairs in print order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("C0", self.c0),
            ("C1", self.c1),
            ("C2", self.c2),
            ("C3", self.c3),
            ("C4", self.c4),
            ("C5", self.c5),
            ("C6", self.c6),
            ("C8", self.c8),
            ("C9", self.c9),
            ("C10", self.c10),
            ("kappa_theory", self.kappa_theory),
            ("tau_max", self.tau_max),
            ("tau_max_stage1", self.tau_max_stage1),
        ]
    }
}

/// Evaluates the constants chain from the initial energy `E0 = C̃₀`, the
/// mass `β₀` and the embedding constants.
pub fn constants_chain(e0: f64, beta0: f64, volume: f64, c2: f64, c3: f64, epsilon: f64) -> Result<ConstantChain> {
    check_embedding(c2, c3)?;
    if !(e0.is_finite() && beta0.is_finite() && volume > 0.0) {
        return Err(PfcError::InvalidArgument("E0, beta0 must be finite and |Ω| positive".into()));
    }
    if e0 + volume < 0.0 {
        return Err(PfcError::InvalidArgument(format!("E0 + |Ω| = {} is negative", e0 + volume)));
    }
    let b = beta0.abs();
    let k1 = 2.0 * (e0 + volume).sqrt();
    let k2 = c2 * (b + k1);
    let k3 = 3.0 * k2 * k2 * c3 * k1;
    let k4 = (2.0 * k1 * k1 + 1.0).sqrt();
    let k5 = c2 * (b + k4);
    let k6 = 3.0 * k5 * k5 * c3 * k4;
    let k8 = 36.0 * k3 * k3 + 12.0 * k6 * k6 + 32.0 * c3 * c3 * k1 * k1 + 12.0 * c3 * c3 * (k2 + k4).powi(2);
    let k9 = (7.0 * k1 * k1 + 4.0 + 0.375 * (k2 + k4).powi(2)).sqrt();
    let k10 = c2 * (b + k9);
    let kappa_theory = lemma_kappa(k10, epsilon);
    let mut chain = ConstantChain {
        c0: e0,
        c1: k1,
        c2: k2,
        c3: k3,
        c4: k4,
        c5: k5,
        c6: k6,
        c8: k8,
        c9: k9,
        c10: k10,
        beta0,
        embed_c2: c2,
        embed_c3: c3,
        volume,
        epsilon,
        kappa_theory,
        tau_max: 0.0,
        tau_max_stage1: (1.0 / (16.0 * c3 * c3)).min(1.0 / (8.0 * k3 * k3)),
    };
    chain.tau_max = chain.tau_max_for(kappa_theory);
    Ok(chain)
}

/// Mutable state of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct StepState {
    pub step_index: usize,
    pub u: RealField,
    /// `ũ^{n+1}` of the last step taken.
    pub u_tilde: Option<RealField>,
    /// Max over all `‖u^n‖∞`, `‖ũ^{n+1}‖∞`, `‖u^{n+1}‖∞` seen so far.
    pub running_max_inf: f64,
    pub kappa: f64,
    /// `E_h(u⁰)`.
    pub initial_energy: f64,
    /// `mean(u⁰)`.
    pub beta0: f64,
}

/// κ prescribed by the policy for the given state.
pub fn select_kappa(state: &StepState, params: &SchemeParams) -> Result<f64> {
    match params.policy {
        KappaPolicy::Fixed(k) => Ok(k),
        KappaPolicy::LemmaAdaptive { .. } => Ok(lemma_kappa(state.running_max_inf, params.epsilon)),
        KappaPolicy::Theory { c2, c3 } => {
            let chain = constants_chain(
                state.initial_energy,
                state.beta0,
                state.u.spec().volume(),
                c2,
                c3,
                params.epsilon,
            )?;
            Ok(chain.kappa_theory)
        }
    }
}

/// Diagnostics recorded after each step (and for the initial state).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub time: f64,
    pub energy: EnergyBreakdown,
    pub mass: f64,
    pub linf: f64,
    /// `‖Δ_h u‖₂`.
    pub h2norm: f64,
    pub kappa: f64,
    /// `max(‖u^n‖∞, ‖ũ^{n+1}‖∞, ‖u^{n+1}‖∞)` of the step ending here.
    pub stage_max: Option<f64>,
    /// Whether `κ ≥ (3 stage_max² − ε)/2`.
    pub lemma_ok: bool,
    /// Whether `‖Δ_h u‖₂ ≤ 2(E_h(u) + |Ω|)^{1/2}`.
    pub h2_bound_ok: bool,
}

/// A completed run.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub epsilon: f64,
    pub kappa: f64,
    /// Steps whose stage maximum broke the κ condition.
    pub lemma_violations: Vec<usize>,
    /// Strict-mode restarts performed.
    pub restarts: usize,
    /// Set when τ exceeded the theory bound.
    pub tau_exceeds_bound: bool,
}

/// Callbacks invoked by the run driver.
pub trait RunHooks {
    fn on_record(&mut self, _record: &TraceRecord, _state: &StepState) -> Result<()> {
        Ok(())
    }

    /// Checkpoint period in steps.
    fn checkpoint_every(&self) -> Option<usize> {
        None
    }

    fn on_checkpoint(&mut self, _state: &StepState) -> Result<()> {
        Ok(())
    }

    /// Called before a strict-mode restart with the enlarged κ.
    fn on_restart(&mut self, _kappa: f64) -> Result<()> {
        Ok(())
    }
}

/// Hooks that do nothing.
pub struct NoHooks;

impl RunHooks for NoHooks {}

/// A stepper paired with its state.
#[derive(Clone, Debug)]
pub struct Simulation {
    stepper: Etdrk2,
    state: StepState,
    tau_exceeds_bound: bool,
}

impl Simulation {
    /// Starts from `u0`, choosing κ by the policy.
    pub fn new(u0: RealField, params: SchemeParams) -> Result<Self> {
        if !u0.is_finite() {
            return Err(PfcError::NonFinite { step: 0 });
        }
        let initial_energy = energy::energy(&u0, params.epsilon).total;
        let mut state = StepState {
            step_index: 0,
            running_max_inf: u0.max_abs(),
            beta0: grid::mean(&u0),
            u: u0,
            u_tilde: None,
            kappa: params.kappa,
            initial_energy,
        };
        let kappa = select_kappa(&state, &params)?;
        let mut tau_exceeds_bound = false;
        if let KappaPolicy::Theory { c2, c3 } = params.policy {
            let chain = constants_chain(initial_energy, state.beta0, state.u.spec().volume(), c2, c3, params.epsilon)?;
            if params.tau > chain.tau_max {
                warn!("tau = {} exceeds the theory bound tau_max = {}", params.tau, chain.tau_max);
                tau_exceeds_bound = true;
            }
        }
        state.kappa = kappa;
        let stepper = Etdrk2::new(*state.u.spec(), params.with_kappa(kappa))?;
        Ok(Self { stepper, state, tau_exceeds_bound })
    }

    /// Continues from a saved state, keeping its κ.
    pub fn resume(state: StepState, params: SchemeParams) -> Result<Self> {
        let p = SchemeParams { kappa: state.kappa, ..params };
        let stepper = Etdrk2::new(*state.u.spec(), p)?;
        Ok(Self { stepper, state, tau_exceeds_bound: false })
    }

    /// Like [`Simulation::new`] but with κ forced to `kappa`.
    pub fn with_kappa(u0: RealField, params: SchemeParams, kappa: f64) -> Result<Self> {
        let mut sim = Self::new(u0, params)?;
        let p = params.with_kappa(kappa);
        sim.state.kappa = p.kappa;
        sim.stepper = Etdrk2::new(*sim.state.u.spec(), p)?;
        Ok(sim)
    }

    pub fn state(&self) -> &StepState {
        &self.state
    }

    pub fn into_state(self) -> StepState {
        self.state
    }

    pub fn stepper(&self) -> &Etdrk2 {
        &self.stepper
    }

    pub fn kappa(&self) -> f64 {
        self.state.kappa
    }

    /// Diagnostics for the current state, without stage information.
    pub fn record(&self) -> TraceRecord {
        self.make_record(None)
    }

    fn make_record(&self, stage_max: Option<f64>) -> TraceRecord {
        let u = &self.state.u;
        let eps = self.stepper.params.epsilon;
        let lap = grid::laplacian(u);
        let e = energy::energy_with_laplacian(u, &lap, eps);
        let h2norm = grid::norm2(&lap);
        let bound = energy::h2_bound_from(h2norm, e.total, u.spec().volume());
        let kappa = self.state.kappa;
        TraceRecord {
            step: self.state.step_index,
            time: self.state.step_index as f64 * self.stepper.params.tau,
            energy: e,
            mass: grid::mean(u),
            linf: u.max_abs(),
            h2norm,
            kappa,
            stage_max,
            lemma_ok: stage_max.is_none_or(|m| kappa >= (3.0 * m * m - eps) / 2.0),
            h2_bound_ok: bound.holds,
        }
    }

    /// Advances one step and returns its diagnostics.
    pub fn step(&mut self) -> Result<TraceRecord> {
        let out = self.stepper.step(&self.state.u);
        let next = self.state.step_index + 1;
        if !(out.u_tilde.is_finite() && out.u_next.is_finite()) {
            return Err(PfcError::NonFinite { step: next });
        }
        let stage_max = self.state.u.max_abs().max(out.u_tilde.max_abs()).max(out.u_next.max_abs());
        self.state.running_max_inf = self.state.running_max_inf.max(stage_max);
        self.state.u = out.u_next;
        self.state.u_tilde = Some(out.u_tilde);
        self.state.step_index = next;
        Ok(self.make_record(Some(stage_max)))
    }

    /// Steps until `step_index == target`, feeding every record to `hooks`.
    pub fn advance_to(&mut self, target: usize, hooks: &mut dyn RunHooks, trace: &mut Trace) -> Result<()> {
        while self.state.step_index < target {
            let rec = self.step()?;
            if !rec.lemma_ok {
                trace.lemma_violations.push(rec.step);
            }
            trace.records.push(rec);
            hooks.on_record(&rec, &self.state)?;
            if let Some(k) = hooks.checkpoint_every() {
                if k > 0 && rec.step % k == 0 {
                    hooks.on_checkpoint(&self.state)?;
                }
            }
        }
        Ok(())
    }
}

/// Runs `n_steps` steps from `u0`.
///
/// Under `LemmaAdaptive { strict: true }` a κ violation restarts the run
/// from `u0` with κ raised to cover the running maximum (at most 16 times).
pub fn run(u0: &RealField, params: &SchemeParams, n_steps: usize, hooks: &mut dyn RunHooks) -> Result<Trace> {
    run_with_state(u0, params, n_steps, hooks).map(|(t, _)| t)
}

/// [`run`], also returning the final state.
pub fn run_with_state(
    u0: &RealField,
    params: &SchemeParams,
    n_steps: usize,
    hooks: &mut dyn RunHooks,
) -> Result<(Trace, StepState)> {
    let strict = matches!(params.policy, KappaPolicy::LemmaAdaptive { strict: true });
    let mut forced: Option<f64> = None;
    let mut restarts = 0;
    loop {
        let mut sim = match forced {
            Some(k) => Simulation::with_kappa(u0.clone(), *params, k)?,
            None => Simulation::new(u0.clone(), *params)?,
        };
        let mut trace = Trace {
            epsilon: params.epsilon,
            kappa: sim.kappa(),
            restarts,
            tau_exceeds_bound: sim.tau_exceeds_bound,
            ..Default::default()
        };
        let first = sim.record();
        trace.records.push(first);
        hooks.on_record(&first, sim.state())?;

        if !strict {
            sim.advance_to(n_steps, hooks, &mut trace)?;
            return Ok((trace, sim.into_state()));
        }
        let mut violated = false;
        while sim.state().step_index < n_steps {
            sim.advance_to(sim.state().step_index + 1, hooks, &mut trace)?;
            if !trace.lemma_violations.is_empty() {
                violated = true;
                break;
            }
        }
        if !violated || restarts >= 16 {
            return Ok((trace, sim.into_state()));
        }
        let k = lemma_kappa(sim.state().running_max_inf, params.epsilon);
        warn!(
            "kappa = {} violated at step {}; restarting with kappa = {k}",
            sim.kappa(),
            trace.lemma_violations[0]
        );
        hooks.on_restart(k)?;
        forced = Some(k);
        restarts += 1;
    }
}
