//! Discrete free energy, chemical potential and the energy-to-H² bound.

use crate::grid::{self, RealField};
use crate::par;
use crate::spectral::{DiagOp, SpectralOps};

/// The four parts of `E_h(u)` and their sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown {
    /// `¼⟨u⁴, 1⟩`
    pub quartic: f64,
    /// `(1−ε)/2 ‖u‖₂²`
    pub quadratic: f64,
    /// `−‖∇_h u‖₂²`
    pub gradient: f64,
    /// `½‖Δ_h u‖₂²`
    pub biharmonic: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn from_parts(quartic: f64, quadratic: f64, gradient: f64, biharmonic: f64) -> Self {
        let total: par::Compensated = [quartic, quadratic, gradient, biharmonic].into_iter().collect();
        Self { quartic, quadratic, gradient, biharmonic, total: total.value() }
    }
}

fn quartic_part(u: &RealField) -> f64 {
    let v = u.values();
    0.25 * u.spec().cell_volume() * par::sum_by(v.len(), |i| {
        let s = v[i] * v[i];
        s * s
    })
}

/// `E_h(u) = ¼⟨u⁴,1⟩ + (1−ε)/2 ‖u‖₂² − ‖∇_h u‖₂² + ½‖Δ_h u‖₂²`.
pub fn energy(u: &RealField, epsilon: f64) -> EnergyBreakdown {
    energy_with_laplacian(u, &grid::laplacian(u), epsilon)
}

/// Same as [`energy`] when `Δ_h u` is already at hand.
pub fn energy_with_laplacian(u: &RealField, lap: &RealField, epsilon: f64) -> EnergyBreakdown {
    EnergyBreakdown::from_parts(
        quartic_part(u),
        0.5 * (1.0 - epsilon) * grid::norm2_sq(u),
        -grid::grad_norm_sq(u),
        0.5 * grid::norm2_sq(lap),
    )
}

/// The stabilised form `¼⟨u⁴,1⟩ − (ε/2)‖u‖₂² + ½‖u + Δ_h u‖₂²`,
/// identical to [`energy`] by summation by parts.
pub fn energy_equivalent(u: &RealField, epsilon: f64) -> f64 {
    let lap = grid::laplacian(u);
    let stab = u.add(&lap);
    let parts = [
        quartic_part(u),
        -0.5 * epsilon * grid::norm2_sq(u),
        0.5 * grid::norm2_sq(&stab),
    ];
    parts.into_iter().collect::<par::Compensated>().value()
}

/// `μ = u³ − εu + (I + Δ_h)² u`, with `(I+Δ_h)²` applied through its symbol `(1−λ)²`.
pub fn chemical_potential(u: &RealField, epsilon: f64) -> RealField {
    let ops = SpectralOps::build(*u.spec(), 0.0, 1.0).expect("valid symbol parameters");
    chemical_potential_with(&ops, u, epsilon)
}

pub fn chemical_potential_with(ops: &SpectralOps, u: &RealField, epsilon: f64) -> RealField {
    let stab = ops.apply(u, DiagOp::StabLap).expect("symbols built for this grid");
    let local = u.map(|x| x * x * x - epsilon * x);
    local.add(&stab)
}

/// Both sides of `‖Δ_h u‖₂ ≤ 2 (E_h(u) + |Ω|)^{1/2}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct H2Bound {
    pub lhs: f64,
    /// NaN when `E_h(u) + |Ω| < 0`.
    pub rhs: f64,
    pub holds: bool,
}

pub fn h2_bound(u: &RealField, epsilon: f64) -> H2Bound {
    let lap = grid::laplacian(u);
    let e = energy_with_laplacian(u, &lap, epsilon).total;
    h2_bound_from(grid::norm2(&lap), e, u.spec().volume())
}

pub(crate) fn h2_bound_from(lap_norm: f64, energy: f64, volume: f64) -> H2Bound {
    let base = energy + volume;
    let rhs = if base >= 0.0 { 2.0 * base.sqrt() } else { f64::NAN };
    let holds = base >= 0.0 && lap_norm <= rhs + 1e-10 * rhs;
    H2Bound { lhs: lap_norm, rhs, holds }
}
