//! Discrete Fourier transform of grid functions and the diagonal operators
//! it produces.
//!
//! Coefficients follow the expansion `f(x) = Σ_k f̂_k e^{2πi k·x/L}`, i.e.
//! `f̂ = DFT(f) / N^dim`, so Parseval reads `‖f‖₂² = L^dim Σ |f̂_k|²`.
//! Coefficient arrays use the natural DFT index layout (same row-major order
//! as the grid); index `j` on an axis is the signed mode `j` for
//! `j ≤ N/2` and `j − N` above.
//!
//! Every finite-difference operator here is circulant, so its action is a
//! per-mode multiplication by a function of the symbols
//! `λ_k = (4/h²) Σ_axes sin²(π k_a / N)` (of `−Δ_h`) and
//! `Λ_k = ((1 − λ_k)² + κ) λ_k` (of `L_κ`).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{PfcError, Result};
use crate::grid::{GridSpec, RealField};
use crate::par;
use crate::phifunc;

/// Fourier coefficients of a grid function.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCoeffs {
    spec: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralCoeffs {
    pub fn from_vec(spec: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != spec.points() {
            return Err(PfcError::SpecMismatch(format!(
                "expected {} coefficients, got {}",
                spec.points(),
                coeffs.len()
            )));
        }
        Ok(Self { spec, coeffs })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient at signed mode `k` (wrapped periodically).
    pub fn at(&self, k: &[i64]) -> Complex64 {
        self.coeffs[self.spec.index(k)]
    }

    /// `L^dim Σ_k w_k |f̂_k|²`, the Parseval value of a diagonal quadratic form.
    pub fn weighted_energy(&self, w: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
        self.spec.volume() * par::sum_by(self.coeffs.len(), |i| w(i) * self.coeffs[i].norm_sqr())
    }

    /// Multiplies coefficient `i` by `m(i)`.
    pub fn scale_by(&mut self, m: impl Fn(usize) -> f64 + Sync + Send) {
        par::for_each_chunk_mut(&mut self.coeffs, par::CHUNK, |c, s| {
            for (o, v) in s.iter_mut().enumerate() {
                *v *= m(c * par::CHUNK + o);
            }
        });
    }
}

/// Signed mode of DFT index `j` on an axis of length `n`.
#[inline]
pub fn signed_mode(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Planned N-dimensional complex transforms for one grid.
///
/// Cheap to clone; safe to share between threads.
#[derive(Clone)]
pub struct Transform {
    spec: GridSpec,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transform").field("spec", &self.spec).finish()
    }
}

impl Transform {
    pub fn new(spec: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            spec,
            fwd: planner.plan_fft_forward(spec.n()),
            inv: planner.plan_fft_inverse(spec.n()),
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    fn run_axes(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.spec.n();
        for axis in 0..self.spec.dim() {
            let stride = self.spec.stride(axis);
            let block = n * stride;
            par::for_each_chunk_mut(data, block, |_, blk| {
                let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
                if stride == 1 {
                    fft.process_with_scratch(blk, &mut scratch);
                    return;
                }
                // Transpose [n][stride] -> [stride][n], transform rows, transpose back.
                let mut t = vec![Complex64::default(); block];
                for (r, row) in blk.chunks(stride).enumerate() {
                    for (c, v) in row.iter().enumerate() {
                        t[c * n + r] = *v;
                    }
                }
                fft.process_with_scratch(&mut t, &mut scratch);
                for (r, row) in blk.chunks_mut(stride).enumerate() {
                    for (c, v) in row.iter_mut().enumerate() {
                        *v = t[c * n + r];
                    }
                }
            });
        }
    }

    /// Unnormalised forward transform in place (`Σ_x f(x) e^{−2πi k·x/L}`).
    pub fn forward_raw(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.spec.points());
        self.run_axes(data, &self.fwd);
    }

    /// Unnormalised inverse transform in place.
    pub fn inverse_raw(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.spec.points());
        self.run_axes(data, &self.inv);
    }

    /// Expansion coefficients `f̂` of `f`.
    pub fn dft(&self, f: &RealField) -> Result<SpectralCoeffs> {
        self.check(f.spec())?;
        let scale = 1.0 / self.spec.points() as f64;
        let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v * scale, 0.0)).collect();
        self.forward_raw(&mut data);
        Ok(SpectralCoeffs { spec: self.spec, coeffs: data })
    }

    /// Real part of the synthesis `Σ_k f̂_k e^{2πi k·x/L}`.
    pub fn idft(&self, c: &SpectralCoeffs) -> Result<RealField> {
        Ok(self.idft_with_residue(c)?.0)
    }

    /// Synthesis plus the largest discarded imaginary part.
    pub fn idft_with_residue(&self, c: &SpectralCoeffs) -> Result<(RealField, f64)> {
        self.check(&c.spec)?;
        let mut data = c.coeffs.clone();
        self.inverse_raw(&mut data);
        let residue = par::max_by(data.len(), |i| data[i].im.abs());
        let values = data.into_iter().map(|z| z.re).collect();
        Ok((RealField::from_vec_unchecked(self.spec, values), residue))
    }

    fn check(&self, spec: &GridSpec) -> Result<()> {
        if spec == &self.spec {
            Ok(())
        } else {
            Err(PfcError::SpecMismatch(format!("transform planned for {:?}, got {spec:?}", self.spec)))
        }
    }
}

/// One-shot forward transform.
pub fn dft(f: &RealField) -> SpectralCoeffs {
    Transform::new(*f.spec()).dft(f).expect("transform planned for this grid")
}

/// One-shot inverse transform.
pub fn idft(c: &SpectralCoeffs) -> RealField {
    Transform::new(c.spec).idft(c).expect("transform planned for this grid")
}

/// Per-mode symbols `λ` of `−Δ_h` and `Λ` of `L_κ`, for fixed `κ` and `τ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolTable {
    spec: GridSpec,
    kappa: f64,
    tau: f64,
    lambda: Vec<f64>,
    big_lambda: Vec<f64>,
}

/// Symbol of `−Δ_h` at the DFT index `idx`.
pub fn lambda_at(spec: &GridSpec, idx: usize) -> f64 {
    let h = spec.h();
    let n = spec.n() as f64;
    let c = spec.coords(idx);
    let s: f64 = c[..spec.dim()]
        .iter()
        .map(|&j| (std::f64::consts::PI * j as f64 / n).sin().powi(2))
        .sum();
    4.0 / (h * h) * s
}

/// Builds the symbol tables; requires `κ ≥ 0` and `τ > 0`.
pub fn build_symbols(spec: GridSpec, kappa: f64, tau: f64) -> Result<SymbolTable> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(PfcError::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(PfcError::InvalidArgument(format!("kappa must be nonnegative, got {kappa}")));
    }
    let mut lambda = vec![0.0; spec.points()];
    par::fill(&mut lambda, |i| lambda_at(&spec, i));
    let big_lambda = lambda.iter().map(|&l| ((1.0 - l) * (1.0 - l) + kappa) * l).collect();
    Ok(SymbolTable { spec, kappa, tau, lambda, big_lambda })
}

impl SymbolTable {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn big_lambda(&self) -> &[f64] {
        &self.big_lambda
    }

    /// Per-mode multiplier of `op`.
    pub fn multiplier(&self, op: DiagOp, idx: usize) -> f64 {
        op.multiplier(self.lambda[idx], self.big_lambda[idx], self.tau)
    }

    /// Multipliers of `op` for every mode.
    pub fn multipliers(&self, op: DiagOp) -> Vec<f64> {
        let mut m = vec![0.0; self.lambda.len()];
        par::fill(&mut m, |i| self.multiplier(op, i));
        m
    }
}

/// Diagonal (Fourier-multiplier) operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DiagOp {
    /// `e^{−τL_κ}`.
    Exp,
    /// `φ₁(τL_κ)`.
    Phi1,
    /// `φ₂(τL_κ)`.
    Phi2,
    /// `G_h = φ₁(τL_κ)`.
    G,
    /// `G⁽⁰⁾ = G_h^{1/2}`.
    G0,
    /// `G⁽¹⁾ = φ₂(τL_κ)`.
    G1,
    /// `G⁽²⁾ = φ₁(τL_κ)^{−1} φ₂(τL_κ)`.
    G2,
    /// `G⁽³⁾ = (G⁽¹⁾)^{1/2}`.
    G3,
    /// `G⁽⁴⁾ = (G⁽²⁾)^{1/2}`.
    G4,
    /// `G⁽⁵⁾` with symbol `((1 − e^{−τΛ})/τ)^{1/2} λ`.
    G5,
    /// `Δ_h`, symbol `−λ`.
    Laplacian,
    /// `Δ_h²`, symbol `λ²`.
    Biharmonic,
    /// `(I + Δ_h)²`, symbol `(1 − λ)²`.
    StabLap,
    /// `L_κ`, symbol `Λ`.
    LKappa,
}

impl DiagOp {
    pub const ALL: [DiagOp; 14] = [
        DiagOp::Exp,
        DiagOp::Phi1,
        DiagOp::Phi2,
        DiagOp::G,
        DiagOp::G0,
        DiagOp::G1,
        DiagOp::G2,
        DiagOp::G3,
        DiagOp::G4,
        DiagOp::G5,
        DiagOp::Laplacian,
        DiagOp::Biharmonic,
        DiagOp::StabLap,
        DiagOp::LKappa,
    ];

    /// Symbol of the operator at one mode.
    #[inline]
    pub fn multiplier(self, lambda: f64, big_lambda: f64, tau: f64) -> f64 {
        let a = tau * big_lambda;
        match self {
            DiagOp::Exp => phifunc::phi0(a),
            DiagOp::Phi1 | DiagOp::G => phifunc::phi1(a),
            DiagOp::Phi2 | DiagOp::G1 => phifunc::phi2(a),
            DiagOp::G2 => phifunc::ratio_unchecked(a),
            DiagOp::G0 => phifunc::phi1(a).sqrt(),
            DiagOp::G3 => phifunc::phi2(a).sqrt(),
            DiagOp::G4 => phifunc::ratio_unchecked(a).sqrt(),
            DiagOp::G5 => (-(-a).exp_m1() / tau).sqrt() * lambda,
            DiagOp::Laplacian => -lambda,
            DiagOp::Biharmonic => lambda * lambda,
            DiagOp::StabLap => (1.0 - lambda) * (1.0 - lambda),
            DiagOp::LKappa => big_lambda,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            DiagOp::Exp => "exp",
            DiagOp::Phi1 => "phi1",
            DiagOp::Phi2 => "phi2",
            DiagOp::G => "G",
            DiagOp::G0 => "G0",
            DiagOp::G1 => "G1",
            DiagOp::G2 => "G2",
            DiagOp::G3 => "G3",
            DiagOp::G4 => "G4",
            DiagOp::G5 => "G5",
            DiagOp::Laplacian => "laplacian",
            DiagOp::Biharmonic => "biharmonic",
            DiagOp::StabLap => "stab_lap",
            DiagOp::LKappa => "L_kappa",
        }
    }
}

impl fmt::Display for DiagOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DiagOp {
    type Err = PfcError;

    fn from_str(s: &str) -> Result<Self> {
        DiagOp::ALL
            .into_iter()
            .find(|op| op.tag() == s)
            .ok_or_else(|| PfcError::UnknownOperator(s.to_string()))
    }
}

/// A transform together with a symbol table: applies diagonal operators to fields.
#[derive(Clone, Debug)]
pub struct SpectralOps {
    transform: Transform,
    table: SymbolTable,
}

impl SpectralOps {
    pub fn new(table: SymbolTable) -> Self {
        Self { transform: Transform::new(table.spec), table }
    }

    pub fn build(spec: GridSpec, kappa: f64, tau: f64) -> Result<Self> {
        Ok(Self::new(build_symbols(spec, kappa, tau)?))
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn table(&self) -> &SymbolTable {
        &self.table
    }

    pub fn dft(&self, f: &RealField) -> Result<SpectralCoeffs> {
        self.transform.dft(f)
    }

    pub fn idft(&self, c: &SpectralCoeffs) -> Result<RealField> {
        self.transform.idft(c)
    }

    /// `idft(m · dft(f))` for the symbol `m` of `op`.
    pub fn apply(&self, f: &RealField, op: DiagOp) -> Result<RealField> {
        self.apply_chain(f, &[op])
    }

    /// Applies the product of several diagonal operators with one transform pair.
    pub fn apply_chain(&self, f: &RealField, ops: &[DiagOp]) -> Result<RealField> {
        let mut c = self.transform.dft(f)?;
        c.scale_by(|i| ops.iter().map(|&op| self.table.multiplier(op, i)).product());
        let (out, residue) = self.transform.idft_with_residue(&c)?;
        debug_assert!(
            residue <= 1e-12 * out.max_abs() + 1e-300,
            "imaginary residue {residue} after {ops:?}"
        );
        Ok(out)
    }

    /// `L^dim Σ_k (Π m_op(k)) |f̂_k|²`.
    pub fn quadratic_form(&self, f: &RealField, ops: &[DiagOp]) -> Result<f64> {
        let c = self.transform.dft(f)?;
        Ok(c.weighted_energy(|i| ops.iter().map(|&op| self.table.multiplier(op, i)).product()))
    }
}

/// `idft(m(λ, Λ) · dft(f))` for the operator `op`.
pub fn apply_diagonal(f: &RealField, table: &SymbolTable, op: DiagOp) -> Result<RealField> {
    if f.spec() != table.spec() {
        return Err(PfcError::SpecMismatch(format!(
            "field on {:?}, symbols on {:?}",
            f.spec(),
            table.spec()
        )));
    }
    SpectralOps::new(table.clone()).apply(f, op)
}

/// Zeroes every coefficient with some `|mode| > cutoff`. The cutoff is
/// clamped to `⌊N/2⌋`; the mean is always kept.
pub fn lowpass(f: &RealField, cutoff: usize) -> RealField {
    lowpass_with(&Transform::new(*f.spec()), f, cutoff)
}

pub(crate) fn lowpass_with(t: &Transform, f: &RealField, cutoff: usize) -> RealField {
    let spec = *f.spec();
    let n = spec.n();
    let cutoff = cutoff.min(n / 2) as i64;
    let mut c = t.dft(f).expect("transform planned for this grid");
    c.scale_by(|i| {
        let keep = (0..spec.dim()).all(|a| signed_mode(spec.coord(i, a), n).abs() <= cutoff);
        if keep {
            1.0
        } else {
            0.0
        }
    });
    t.idft(&c).expect("transform planned for this grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{self, laplacian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rel_max(a: &RealField, b: &RealField) -> f64 {
        a.sub(b).max_abs() / b.max_abs().max(1e-300)
    }

    #[test]
    fn signed_mode_layout() {
        assert_eq!((0..8).map(|j| signed_mode(j, 8)).collect::<Vec<_>>(), [0, 1, 2, 3, 4, -3, -2, -1]);
        assert_eq!((0..5).map(|j| signed_mode(j, 5)).collect::<Vec<_>>(), [0, 1, 2, -2, -1]);
    }

    #[test]
    fn constant_field_has_only_zero_mode() {
        let s = GridSpec::new(3, 6, 1.0).unwrap();
        let c = dft(&RealField::constant(s, 1.5));
        assert!((c.coeffs()[0] - Complex64::new(1.5, 0.0)).norm() < 1e-14);
        assert!(c.coeffs()[1..].iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn cosine_splits_into_two_halves() {
        for n in [8, 9] {
            let s = GridSpec::new(2, n, 3.0).unwrap();
            let f = RealField::from_fn(s, |x| (2.0 * PI * x[0] / 3.0).cos());
            let c = dft(&f);
            for i in 0..s.points() {
                let k = [signed_mode(s.coord(i, 0), n), signed_mode(s.coord(i, 1), n)];
                let want = if k[1] == 0 && k[0].abs() == 1 { 0.5 } else { 0.0 };
                assert!((c.coeffs()[i] - Complex64::new(want, 0.0)).norm() < 1e-13, "{k:?}");
            }
        }
    }

    #[test]
    fn round_trip_parseval_and_symmetry() {
        let s = GridSpec::new(3, 6, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = RealField::random(s, &mut rng);
        let t = Transform::new(s);
        let c = t.dft(&f).unwrap();
        let (back, residue) = t.idft_with_residue(&c).unwrap();
        assert!(back.sub(&f).max_abs() <= 1e-13 * f.max_abs());
        assert!(residue < 1e-14);
        let lhs = grid::norm2_sq(&f);
        let rhs = c.weighted_energy(|_| 1.0);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs);
        for i in 0..s.points() {
            let c0 = s.coords(i);
            let neg: Vec<i64> = c0[..3].iter().map(|&j| -(j as i64)).collect();
            let a = c.coeffs()[i];
            let b = c.at(&neg).conj();
            assert!((a - b).norm() <= 1e-13 * c.coeffs().iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }

    #[test]
    fn symbol_table_values() {
        let s = GridSpec::new(3, 4, 2.0 * PI).unwrap();
        let t = build_symbols(s, 1.5, 0.1).unwrap();
        assert_eq!(t.lambda()[0], 0.0);
        assert_eq!(t.big_lambda()[0], 0.0);
        let idx = s.index(&[1, 0, 0]);
        assert!((t.lambda()[idx] - 8.0 / (PI * PI)).abs() < 1e-14);
        let h = s.h();
        for (i, (&l, &bl)) in t.lambda().iter().zip(t.big_lambda()).enumerate() {
            assert!(l >= 0.0 && l <= 12.0 / (h * h) + 1e-12, "{i}");
            assert_eq!(bl, ((1.0 - l).powi(2) + 1.5) * l);
        }
        assert!(build_symbols(s, 1.0, 0.0).is_err());
        assert!(build_symbols(s, 1.0, -1.0).is_err());
        assert!(build_symbols(s, -0.5, 1.0).is_err());
    }

    #[test]
    fn stencil_equals_symbol() {
        for (dim, n) in [(2, 16), (2, 9), (3, 8)] {
            let s = GridSpec::new(dim, n, 5.0).unwrap();
            let ops = SpectralOps::build(s, 0.0, 1.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let f = RealField::random(s, &mut rng);
            assert!(rel_max(&ops.apply(&f, DiagOp::Laplacian).unwrap(), &laplacian(&f)) <= 1e-12);
        }
    }

    #[test]
    fn diagonal_operator_edge_cases() {
        let s = GridSpec::new(2, 8, 4.0).unwrap();
        let table = build_symbols(s, 2.0, 0.3).unwrap();
        let c = RealField::constant(s, 0.75);
        let e = apply_diagonal(&c, &table, DiagOp::Exp).unwrap();
        assert!(e.sub(&c).max_abs() < 1e-15);
        let g5 = apply_diagonal(&c, &table, DiagOp::G5).unwrap();
        assert!(g5.max_abs() < 1e-15);
        let other = RealField::zeros(GridSpec::new(2, 10, 4.0).unwrap());
        assert!(apply_diagonal(&other, &table, DiagOp::G).is_err());
        assert!(matches!("G9".parse::<DiagOp>(), Err(PfcError::UnknownOperator(_))));
        for op in DiagOp::ALL {
            assert_eq!(op.tag().parse::<DiagOp>().unwrap(), op);
        }
    }

    #[test]
    fn g_factorises_through_g0() {
        let s = GridSpec::new(2, 12, 6.0).unwrap();
        let ops = SpectralOps::build(s, 1.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = RealField::random(s, &mut rng);
        let g = RealField::random(s, &mut rng);
        let lhs = grid::inner(&f, &ops.apply(&g, DiagOp::G).unwrap()).unwrap();
        let rhs = grid::inner(&ops.apply(&f, DiagOp::G0).unwrap(), &ops.apply(&g, DiagOp::G0).unwrap()).unwrap();
        let mag = grid::norm2(&f) * grid::norm2(&g);
        assert!((lhs - rhs).abs() <= 1e-12 * mag);
    }

    #[test]
    fn g0_commutes_with_laplacian() {
        let s = GridSpec::new(3, 6, 3.0).unwrap();
        let ops = SpectralOps::build(s, 1.0, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let f = RealField::random(s, &mut rng);
        let a = ops.apply(&laplacian(&f), DiagOp::G0).unwrap();
        let b = laplacian(&ops.apply(&f, DiagOp::G0).unwrap());
        assert!(rel_max(&a, &b) <= 1e-12);
    }

    #[test]
    fn lowpass_properties() {
        let s = GridSpec::new(2, 16, 8.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = RealField::random(s, &mut rng);
        assert!(lowpass(&f, 8).sub(&f).max_abs() < 1e-13);
        let m = grid::mean(&f);
        let c = lowpass(&f, 0);
        assert!(c.values().iter().all(|v| (v - m).abs() < 1e-14));
        let once = lowpass(&f, 4);
        let twice = lowpass(&once, 4);
        assert!(twice.sub(&once).max_abs() < 1e-13);
        assert!((grid::mean(&once) - m).abs() < 1e-14);
    }
}
