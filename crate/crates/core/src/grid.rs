//! Periodic uniform grids and grid functions.
//!
//! Storage is row-major with the last axis fastest: in 2-D the value at
//! `(i, j)` lives at `i * N + j`, in 3-D `(i, j, k)` lives at
//! `(i * N + j) * N + k`. Grid point `(i, j, k)` sits at `(i h, j h, k h)`.
//!
//! A [`StaggeredField`] stores one array per axis; entry `idx` of the
//! component for axis `a` is the value at the grid point of `idx` shifted by
//! `h/2` along `a` (and only along `a`).

use rand::Rng;

use crate::error::{PfcError, Result};
use crate::par;

/// Uniform periodic grid on `(0, L)^dim` with `N` points per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    dim: usize,
    n: usize,
    len: f64,
    h: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, len: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(PfcError::InvalidGrid(format!("dim must be 2 or 3, got {dim}")));
        }
        if n < 4 {
            return Err(PfcError::InvalidGrid(format!("N must be at least 4, got {n}")));
        }
        if !(len.is_finite() && len > 0.0) {
            return Err(PfcError::InvalidGrid(format!("L must be positive, got {len}")));
        }
        if n.checked_pow(dim as u32).is_none_or(|p| p > isize::MAX as usize / 16) {
            return Err(PfcError::InvalidGrid(format!("N^dim overflows for N = {n}")));
        }
        Ok(Self { dim, n, len, h: len / n as f64 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Domain edge length.
    pub fn len(&self) -> f64 {
        self.len
    }

    /// Mesh size `L / N`.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// `|Ω| = L^dim`.
    pub fn volume(&self) -> f64 {
        self.len.powi(self.dim as i32)
    }

    /// `h^dim`, the weight of one grid point in the discrete inner product.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Total number of grid points `N^dim`.
    pub fn points(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Flat-index stride of `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    /// Integer coordinate of flat index `idx` along `axis`.
    #[inline]
    pub fn coord(&self, idx: usize, axis: usize) -> usize {
        (idx / self.stride(axis)) % self.n
    }

    /// Per-axis integer coordinates of `idx`.
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let mut c = [0; 3];
        for (a, slot) in c.iter_mut().enumerate().take(self.dim) {
            *slot = self.coord(idx, a);
        }
        c
    }

    /// Flat index from (possibly out-of-range) signed coordinates, wrapped periodically.
    pub fn index(&self, coords: &[i64]) -> usize {
        debug_assert_eq!(coords.len(), self.dim);
        let n = self.n as i64;
        coords
            .iter()
            .fold(0usize, |acc, &c| acc * self.n + c.rem_euclid(n) as usize)
    }

    /// Neighbour of `idx` one step forward along `axis`, wrapping.
    #[inline]
    pub fn next(&self, idx: usize, axis: usize) -> usize {
        let s = self.stride(axis);
        if (idx / s) % self.n == self.n - 1 {
            idx + s - self.n * s
        } else {
            idx + s
        }
    }

    /// Neighbour of `idx` one step backward along `axis`, wrapping.
    #[inline]
    pub fn prev(&self, idx: usize, axis: usize) -> usize {
        let s = self.stride(axis);
        if (idx / s) % self.n == 0 {
            idx + self.n * s - s
        } else {
            idx - s
        }
    }

    fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(PfcError::SpecMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Real periodic grid function.
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl RealField {
    pub fn zeros(spec: GridSpec) -> Self {
        Self::constant(spec, 0.0)
    }

    pub fn constant(spec: GridSpec, c: f64) -> Self {
        Self { spec, values: vec![c; spec.points()] }
    }

    /// Wraps `values`; rejects a wrong length or non-finite entries.
    pub fn from_vec(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.points() {
            return Err(PfcError::SpecMismatch(format!(
                "expected {} values, got {}",
                spec.points(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PfcError::InvalidArgument(format!("non-finite value at index {i}")));
        }
        Ok(Self { spec, values })
    }

    pub(crate) fn from_vec_unchecked(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.points());
        Self { spec, values }
    }

    /// Evaluates `f` at the physical coordinates `(x, y[, z])` of every grid point.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> Self {
        let mut values = vec![0.0; spec.points()];
        par::fill(&mut values, |idx| {
            let c = spec.coords(idx);
            let x = [c[0] as f64 * spec.h, c[1] as f64 * spec.h, c[2] as f64 * spec.h];
            f(&x[..spec.dim])
        });
        Self { spec, values }
    }

    /// Independent uniform values in `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(spec: GridSpec, rng: &mut R) -> Self {
        let values = (0..spec.points()).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Pointwise map.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync + Send) -> Self {
        let mut out = vec![0.0; self.values.len()];
        par::fill(&mut out, |i| f(self.values[i]));
        Self::from_vec_unchecked(self.spec, out)
    }

    /// Pointwise binary map; panics on a grid mismatch.
    pub fn zip_map(&self, other: &RealField, f: impl Fn(f64, f64) -> f64 + Sync + Send) -> Self {
        assert_eq!(self.spec, other.spec, "grid mismatch in zip_map");
        let mut out = vec![0.0; self.values.len()];
        par::fill(&mut out, |i| f(self.values[i], other.values[i]));
        Self::from_vec_unchecked(self.spec, out)
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &RealField, b: f64) -> Self {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|x| a * x)
    }

    pub fn add(&self, other: &RealField) -> Self {
        self.zip_map(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &RealField) -> Self {
        self.zip_map(other, |x, y| x - y)
    }

    /// Pointwise cube.
    pub fn cube(&self) -> Self {
        self.map(|x| x * x * x)
    }

    /// Copy with the mean subtracted.
    pub fn mean_free(&self) -> Self {
        let m = mean(self);
        self.map(|x| x - m)
    }

    /// `max_i |f_i|`.
    pub fn max_abs(&self) -> f64 {
        par::max_by(self.values.len(), |i| self.values[i].abs())
    }

    /// Unweighted compensated sum of the values.
    pub fn sum(&self) -> f64 {
        par::sum_by(self.values.len(), |i| self.values[i])
    }
}

impl std::ops::Index<usize> for RealField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Vector grid function on the staggered (face) points, one component per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct StaggeredField {
    spec: GridSpec,
    components: Vec<Vec<f64>>,
}

impl StaggeredField {
    pub fn zeros(spec: GridSpec) -> Self {
        Self { spec, components: vec![vec![0.0; spec.points()]; spec.dim()] }
    }

    pub fn from_components(spec: GridSpec, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != spec.dim() {
            return Err(PfcError::SpecMismatch(format!(
                "expected {} components, got {}",
                spec.dim(),
                components.len()
            )));
        }
        if components.iter().any(|c| c.len() != spec.points()) {
            return Err(PfcError::SpecMismatch("component length mismatch".into()));
        }
        Ok(Self { spec, components })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.components
    }

    /// Componentwise `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &StaggeredField, b: f64) -> Self {
        assert_eq!(self.spec, other.spec, "grid mismatch in lin_comb");
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect())
            .collect();
        Self { spec: self.spec, components }
    }
}

/// `f̄ = ⟨f, 1⟩ / |Ω|`, the arithmetic mean of the values.
pub fn mean(f: &RealField) -> f64 {
    f.sum() / f.spec.points() as f64
}

/// Discrete L² inner product `h^dim Σ f g`.
pub fn inner(f: &RealField, g: &RealField) -> Result<f64> {
    f.spec.check_same(&g.spec)?;
    Ok(inner_unchecked(f, g))
}

pub(crate) fn inner_unchecked(f: &RealField, g: &RealField) -> f64 {
    f.spec.cell_volume() * par::sum_by(f.values.len(), |i| f.values[i] * g.values[i])
}

/// `‖f‖₂²`.
pub fn norm2_sq(f: &RealField) -> f64 {
    inner_unchecked(f, f)
}

/// `‖f‖₂`.
pub fn norm2(f: &RealField) -> f64 {
    norm2_sq(f).sqrt()
}

/// Discrete norms of a grid function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub linf: f64,
    pub h1: f64,
    pub h2: f64,
}

pub fn norms(f: &RealField) -> Norms {
    let l2sq = norm2_sq(f);
    let g = grad(f);
    let gradsq = staggered_inner_unchecked(&g, &g);
    let lapsq = norm2_sq(&laplacian(f));
    Norms {
        l2: l2sq.sqrt(),
        linf: f.max_abs(),
        h1: (l2sq + gradsq).sqrt(),
        h2: (l2sq + gradsq + lapsq).sqrt(),
    }
}

/// Forward differences `(D_a f)_{i+½e_a} = (f_{i+e_a} − f_i) / h` on every axis.
pub fn grad(f: &RealField) -> StaggeredField {
    let spec = f.spec;
    let inv_h = 1.0 / spec.h;
    let components = (0..spec.dim)
        .map(|a| {
            let mut c = vec![0.0; spec.points()];
            par::fill(&mut c, |i| (f.values[spec.next(i, a)] - f.values[i]) * inv_h);
            c
        })
        .collect();
    StaggeredField { spec, components }
}

/// Discrete divergence `Σ_a (f^a_{i+½e_a} − f^a_{i−½e_a}) / h`.
pub fn divergence(v: &StaggeredField) -> RealField {
    let spec = v.spec;
    let inv_h = 1.0 / spec.h;
    let mut out = vec![0.0; spec.points()];
    par::fill(&mut out, |i| {
        (0..spec.dim)
            .map(|a| {
                let c = &v.components[a];
                c[i] - c[spec.prev(i, a)]
            })
            .sum::<f64>()
            * inv_h
    });
    RealField::from_vec_unchecked(spec, out)
}

/// The `(2·dim+1)`-point periodic Laplacian.
pub fn laplacian(f: &RealField) -> RealField {
    let spec = f.spec;
    let inv_h2 = 1.0 / (spec.h * spec.h);
    let centre = 2.0 * spec.dim as f64;
    let v = &f.values;
    let mut out = vec![0.0; spec.points()];
    par::fill(&mut out, |i| {
        let mut s = 0.0;
        for a in 0..spec.dim {
            s += v[spec.next(i, a)] + v[spec.prev(i, a)];
        }
        (s - centre * v[i]) * inv_h2
    });
    RealField::from_vec_unchecked(spec, out)
}

/// `Δ_h^k f` by repeated stencil application.
pub fn laplacian_pow(f: &RealField, k: usize) -> RealField {
    (0..k).fold(f.clone(), |acc, _| laplacian(&acc))
}

/// `⟨a, b⟩ = Σ_axes ⟨a_x(aˣ bˣ), 1⟩`. The face average sums to the plain
/// face sum on a periodic grid, so this is `h^dim Σ_axes Σ aˣ bˣ`.
pub fn staggered_inner(a: &StaggeredField, b: &StaggeredField) -> Result<f64> {
    a.spec.check_same(&b.spec)?;
    Ok(staggered_inner_unchecked(a, b))
}

pub(crate) fn staggered_inner_unchecked(a: &StaggeredField, b: &StaggeredField) -> f64 {
    let n = a.spec.points();
    let total: par::Compensated = a
        .components
        .iter()
        .zip(&b.components)
        .map(|(x, y)| par::sum_by(n, |i| x[i] * y[i]))
        .collect();
    a.spec.cell_volume() * total.value()
}

/// `‖∇_h f‖₂²`.
pub fn grad_norm_sq(f: &RealField) -> f64 {
    let g = grad(f);
    staggered_inner_unchecked(&g, &g)
}
