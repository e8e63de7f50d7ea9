//! φ-functions of exponential integrators,
//! `φ₀(a) = e^{−a}`, `φ₁(a) = (1 − e^{−a})/a`, `φ₂(a) = (a − (1 − e^{−a}))/a²`,
//! evaluated without cancellation on `[0, ∞)`.

use crate::error::{PfcError, Result};

/// Below this argument φ₂ comes from its Taylor series.
pub const TAYLOR_THRESHOLD: f64 = 0.5;

/// Above this argument `e^{−a}` is treated as zero.
pub const UNDERFLOW_THRESHOLD: f64 = 708.0;

/// φ-function values at one argument.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiEval {
    pub a: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub phi2: f64,
}

fn check_arg(a: f64) -> Result<()> {
    if a.is_finite() && a >= 0.0 {
        Ok(())
    } else {
        Err(PfcError::InvalidArgument(format!(
            "φ-function argument must be finite and nonnegative, got {a}"
        )))
    }
}

/// Evaluates φ₀, φ₁, φ₂ at `a ≥ 0`; `a = 0` gives the limits `(1, 1, ½)`.
pub fn phi(a: f64) -> Result<PhiEval> {
    check_arg(a)?;
    Ok(phi_unchecked(a))
}

/// `φ₂(a)/φ₁(a)`, with limit ½ at zero and 1 at infinity.
pub fn phi_ratio(a: f64) -> Result<f64> {
    check_arg(a)?;
    Ok(ratio_unchecked(a))
}

#[inline]
pub(crate) fn phi_unchecked(a: f64) -> PhiEval {
    PhiEval { a, phi0: phi0(a), phi1: phi1(a), phi2: phi2(a) }
}

#[inline]
pub(crate) fn ratio_unchecked(a: f64) -> f64 {
    if a == 0.0 {
        0.5
    } else {
        phi2(a) / phi1(a)
    }
}

#[inline]
pub(crate) fn phi0(a: f64) -> f64 {
    if a > UNDERFLOW_THRESHOLD {
        0.0
    } else {
        (-a).exp()
    }
}

#[inline]
pub(crate) fn phi1(a: f64) -> f64 {
    if a == 0.0 {
        1.0
    } else if a > UNDERFLOW_THRESHOLD {
        1.0 / a
    } else {
        -(-a).exp_m1() / a
    }
}

#[inline]
pub(crate) fn phi2(a: f64) -> f64 {
    if a < TAYLOR_THRESHOLD {
        phi2_series(a)
    } else if a > UNDERFLOW_THRESHOLD {
        (a - 1.0) / (a * a)
    } else {
        (a + (-a).exp_m1()) / (a * a)
    }
}

/// `Σ_{k≥0} (−a)^k / (k+2)!`, stopped once a term drops below 1e-18.
fn phi2_series(a: f64) -> f64 {
    let mut term: f64 = 0.5;
    let mut sum = 0.5;
    let mut k = 0.0;
    while term.abs() >= 1e-18 {
        k += 1.0;
        term *= -a / (k + 2.0);
        sum += term;
    }
    sum
}
