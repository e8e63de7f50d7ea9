//! Slow, independent reference implementations used as test oracles.

#![allow(dead_code)]

use std::f64::consts::PI;

use pfc_etdrk::GridSpec;
use rustfft::num_complex::Complex64;

/// Double-double number `hi + lo` with about 32 significant digits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const LN2: Dd = Dd { hi: std::f64::consts::LN_2, lo: 2.319_046_813_846_299_6e-17 };

    pub fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn mul_f(self, x: f64) -> Dd {
        self.mul(Dd::from(x))
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul_f(q1));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul_f(q2));
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::from(q3))
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            self.neg()
        } else {
            self
        }
    }
}

/// `e^{x}` for `x ≤ 0` via `x = k ln2 + r`, Taylor series on `r`.
pub fn dd_exp(x: f64) -> Dd {
    let k = (x / std::f64::consts::LN_2).round();
    let r = Dd::from(x).sub(Dd::LN2.mul_f(k));
    // r/2^8 then square 8 times
    let r = r.mul_f(1.0 / 256.0);
    let mut term = Dd::ONE;
    let mut sum = Dd::ONE;
    for n in 1..40 {
        term = term.mul(r).div(Dd::from(n as f64));
        sum = sum.add(term);
        if term.hi.abs() < 1e-40 {
            break;
        }
    }
    for _ in 0..8 {
        sum = sum.mul(sum);
    }
    let scale = 2f64.powi(k as i32);
    Dd { hi: sum.hi * scale, lo: sum.lo * scale }
}

/// `Σ_{j≥0} (−a)^j / (j+m)!`, i.e. `φ_m(a)`, for moderate `a`.
fn phi_series(a: f64, m: u32) -> Dd {
    let mut fact = Dd::ONE;
    for j in 1..=m {
        fact = fact.mul_f(j as f64);
    }
    let mut term = Dd::ONE.div(fact);
    let mut sum = term;
    for j in 1..400 {
        term = term.mul_f(-a).div(Dd::from((j + m) as f64));
        sum = sum.add(term);
        if term.hi.abs() < 1e-36 * sum.hi.abs() {
            break;
        }
    }
    sum
}

/// Reference `(φ₀, φ₁, φ₂)` at `a ≥ 0`, good to well below 1e-16 relative.
pub fn phi_ref(a: f64) -> (f64, f64, f64) {
    if a == 0.0 {
        return (1.0, 1.0, 0.5);
    }
    let e = dd_exp(-a);
    if a < 1.0 {
        return (e.to_f64(), phi_series(a, 1).to_f64(), phi_series(a, 2).to_f64());
    }
    let ad = Dd::from(a);
    let one_minus = Dd::ONE.sub(e);
    let p1 = one_minus.div(ad);
    let p2 = ad.sub(one_minus).div(ad.mul(ad));
    (e.to_f64(), p1.to_f64(), p2.to_f64())
}

/// Unnormalised-then-scaled forward DFT `ĉ_k = N^{-d} Σ_j f_j e^{−2πi k·j/N}` by direct summation.
pub fn naive_dft(spec: &GridSpec, f: &[f64]) -> Vec<Complex64> {
    let n = spec.n();
    let d = spec.dim();
    let pts = spec.points();
    let norm = 1.0 / pts as f64;
    (0..pts)
        .map(|k| {
            let kc = spec.coords(k);
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..pts {
                let jc = spec.coords(j);
                let phase: usize = (0..d).map(|a| kc[a] * jc[a] % n).sum::<usize>() % n;
                let ang = -2.0 * PI * phase as f64 / n as f64;
                s += Complex64::new(ang.cos(), ang.sin()) * f[j];
            }
            s * norm
        })
        .collect()
}

/// Inverse of [`naive_dft`], returning the real part.
pub fn naive_idft(spec: &GridSpec, c: &[Complex64]) -> Vec<f64> {
    let n = spec.n();
    let d = spec.dim();
    let pts = spec.points();
    (0..pts)
        .map(|j| {
            let jc = spec.coords(j);
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..pts {
                let kc = spec.coords(k);
                let phase: usize = (0..d).map(|a| kc[a] * jc[a] % n).sum::<usize>() % n;
                let ang = 2.0 * PI * phase as f64 / n as f64;
                s += c[k] * Complex64::new(ang.cos(), ang.sin());
            }
            s.re
        })
        .collect()
}

/// `λ_k = (4/h²) Σ_a sin²(π k_a / N)` evaluated from scratch.
pub fn symbol(spec: &GridSpec, k: usize) -> f64 {
    let kc = spec.coords(k);
    let h = spec.h();
    (0..spec.dim())
        .map(|a| {
            let s = (PI * kc[a] as f64 / spec.n() as f64).sin();
            4.0 * s * s / (h * h)
        })
        .sum()
}

/// Periodic 5/7-point Laplacian written out with explicit index arithmetic.
pub fn stencil_laplacian(spec: &GridSpec, f: &[f64]) -> Vec<f64> {
    let n = spec.n() as i64;
    let d = spec.dim();
    let h2 = spec.h() * spec.h();
    (0..spec.points())
        .map(|i| {
            let c = spec.coords(i);
            let mut s = -2.0 * d as f64 * f[i];
            for a in 0..d {
                for off in [-1i64, 1] {
                    let mut cc = [c[0] as i64, c[1] as i64, c[2] as i64];
                    cc[a] = (cc[a] + off).rem_euclid(n);
                    let idx = (0..d).fold(0i64, |acc, b| acc * n + cc[b]) as usize;
                    s += f[idx];
                }
            }
            s / h2
        })
        .collect()
}

/// `max |a − b| / max |b|`.
pub fn rel_max(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}
