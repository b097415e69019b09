//! Fourier-side operators on the periodic box.
//!
//! Coefficients are stored in the same `(i, j, k)` layout as physical
//! samples; index `j` carries the integer wavenumber `m = j` for `j < n/2`
//! and `m = j - n` otherwise, with `k = 2πm/L`.
//!
//! Odd-order operators (derivatives, the Leray projector, divergence) use a
//! wavevector whose Nyquist component is set to zero so that real fields
//! stay real. The heat multiplier uses the full `|k|²`.

pub mod fft;
mod inequality;

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::grid::{Grid, GridError, VectorField3};
use crate::lorentz::LorentzError;

pub use inequality::{
    inequality_report, random_gaussians, DiffusiveGaussians, InequalityKind, RatioRow, RatioTable,
    SampleFamily,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("coefficient array has length {found}, grid needs {expected}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("heat propagation needs t >= 0, got {0}")]
    NegativeTime(f64),
    #[error("Oseen operator needs t > 0, got {0}")]
    NonPositiveTime(f64),
    #[error("derivative order {0} exceeds 2")]
    DerivativeOrder(u32),
    #[error("exponent relation violated: {0}")]
    Exponents(String),
    #[error("t grid must be nonempty, positive and finite")]
    BadTimeGrid,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Lorentz(#[from] LorentzError),
}

/// Per-axis wavenumber tables for one grid.
#[derive(Debug, Clone)]
pub struct Wavenumbers {
    n: usize,
    /// `2πm/L`.
    k: Vec<f64>,
    /// Same with the Nyquist entry zeroed.
    kappa: Vec<f64>,
    /// `|m| <= n/3`.
    keep: Vec<bool>,
}

impl Wavenumbers {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.n();
        let base = 2.0 * PI / grid.box_len();
        let m: Vec<i64> = (0..n as i64)
            .map(|j| if j < n as i64 / 2 { j } else { j - n as i64 })
            .collect();
        let k: Vec<f64> = m.iter().map(|&m| base * m as f64).collect();
        let kappa = m
            .iter()
            .map(|&m| {
                if m == -(n as i64) / 2 {
                    0.0
                } else {
                    base * m as f64
                }
            })
            .collect();
        let keep = m
            .iter()
            .map(|&m| 3 * m.unsigned_abs() as usize <= n)
            .collect();
        Self { n, k, kappa, keep }
    }

    pub fn integer(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    pub fn k(&self, j: usize) -> f64 {
        self.k[j]
    }

    pub fn kappa(&self, j: usize) -> f64 {
        self.kappa[j]
    }

    pub fn keep(&self, j: usize) -> bool {
        self.keep[j]
    }

    pub fn k_squared(&self, i: usize, j: usize, k: usize) -> f64 {
        self.k[i] * self.k[i] + self.k[j] * self.k[j] + self.k[k] * self.k[k]
    }

    pub fn kappa_vec(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.kappa[i], self.kappa[j], self.kappa[k]]
    }

    pub fn kept(&self, i: usize, j: usize, k: usize) -> bool {
        self.keep[i] && self.keep[j] && self.keep[k]
    }
}

/// Transform context: grid, cached plan and wavenumber tables.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    plan: Arc<fft::Fft3>,
    wn: Arc<Wavenumbers>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        Self {
            grid,
            plan: fft::plan(grid.n()),
            wn: Arc::new(Wavenumbers::new(&grid)),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn wavenumbers(&self) -> &Wavenumbers {
        &self.wn
    }

    pub fn plan(&self) -> &fft::Fft3 {
        &self.plan
    }

    pub fn forward(&self, u: &VectorField3) -> SpectralVectorField3 {
        let c = u.components();
        let (a, b) = self.plan.forward_real_pair(&c[0], &c[1]);
        let z = self.plan.forward_real(&c[2]);
        SpectralVectorField3 {
            grid: self.grid,
            coeffs: [a, b, z],
        }
    }

    pub fn inverse(&self, u: &SpectralVectorField3) -> VectorField3 {
        let (a, b) = self.plan.inverse_real_pair(&u.coeffs[0], &u.coeffs[1]);
        let z = self.plan.inverse_real(&u.coeffs[2]);
        VectorField3::from_components_unchecked(self.grid, [a, b, z])
    }

    /// Applies `f(i, j, k, [û₀, û₁, û₂])` to every mode in place.
    pub fn map_modes<F>(&self, u: &mut SpectralVectorField3, f: F)
    where
        F: Fn(usize, usize, usize, &mut [Complex64; 3]) + Sync,
    {
        let n = self.grid.n();
        let [a, b, c] = &mut u.coeffs;
        a.par_chunks_mut(n * n)
            .zip(b.par_chunks_mut(n * n))
            .zip(c.par_chunks_mut(n * n))
            .enumerate()
            .for_each(|(i, ((sa, sb), sc))| {
                for j in 0..n {
                    for k in 0..n {
                        let idx = j * n + k;
                        let mut v = [sa[idx], sb[idx], sc[idx]];
                        f(i, j, k, &mut v);
                        sa[idx] = v[0];
                        sb[idx] = v[1];
                        sc[idx] = v[2];
                    }
                }
            });
    }

    pub fn leray_in_place(&self, u: &mut SpectralVectorField3) {
        let wn = &*self.wn;
        self.map_modes(u, |i, j, k, v| leray_mode(wn.kappa_vec(i, j, k), v));
    }

    pub fn heat_in_place(&self, u: &mut SpectralVectorField3, t: f64) {
        let wn = &*self.wn;
        self.map_modes(u, |i, j, k, v| {
            let e = (-wn.k_squared(i, j, k) * t).exp();
            for c in v.iter_mut() {
                *c *= e;
            }
        });
    }

    pub fn dealias_in_place(&self, u: &mut SpectralVectorField3) {
        let wn = &*self.wn;
        self.map_modes(u, |i, j, k, v| {
            if !wn.kept(i, j, k) {
                *v = [Complex64::default(); 3];
            }
        });
    }

    pub fn derivative_in_place(&self, u: &mut SpectralVectorField3, alpha: [u32; 3]) {
        let wn = &*self.wn;
        self.map_modes(u, |i, j, k, v| {
            let m = derivative_symbol(wn.kappa_vec(i, j, k), alpha);
            for c in v.iter_mut() {
                *c *= m;
            }
        });
    }

    /// `iκ·û` per mode.
    pub fn divergence(&self, u: &SpectralVectorField3) -> Vec<Complex64> {
        let n = self.grid.n();
        let wn = &*self.wn;
        let mut out = vec![Complex64::default(); self.grid.len()];
        out.par_chunks_mut(n * n).enumerate().for_each(|(i, slab)| {
            for j in 0..n {
                for k in 0..n {
                    let idx = (i * n + j) * n + k;
                    let kv = wn.kappa_vec(i, j, k);
                    let d = kv[0] * u.coeffs[0][idx]
                        + kv[1] * u.coeffs[1][idx]
                        + kv[2] * u.coeffs[2][idx];
                    slab[j * n + k] = Complex64::new(0.0, 1.0) * d;
                }
            }
        });
        out
    }

    /// Physical field with every mode outside the 2/3 band removed.
    pub fn dealias_physical(&self, u: &VectorField3) -> VectorField3 {
        let mut s = self.forward(u);
        self.dealias_in_place(&mut s);
        self.inverse(&s)
    }

    /// Spectral `∇·(u⊗v)` from the nine physical products, masked.
    pub fn div_products(&self, u: &VectorField3, v: &VectorField3) -> SpectralVectorField3 {
        let len = self.grid.len();
        let prod = |i: usize, j: usize| -> Vec<f64> {
            let (a, b) = (u.component(i), v.component(j));
            (0..len).map(|x| a[x] * b[x]).collect()
        };
        let mut entries: Vec<Vec<Complex64>> = Vec::with_capacity(9);
        let pairs: Vec<(usize, usize)> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
        for chunk in pairs.chunks(2) {
            if chunk.len() == 2 {
                let (a, b) = self.plan.forward_real_pair(
                    &prod(chunk[0].0, chunk[0].1),
                    &prod(chunk[1].0, chunk[1].1),
                );
                entries.push(a);
                entries.push(b);
            } else {
                entries.push(self.plan.forward_real(&prod(chunk[0].0, chunk[0].1)));
            }
        }
        self.divergence_of_tensor(|i, j| &entries[3 * i + j])
    }

    /// Spectral `∇·T` for a symmetric tensor given by its six entries
    /// `[T00, T11, T22, T01, T02, T12]`, masked.
    pub fn div_symmetric(&self, t: &[Vec<f64>; 6]) -> SpectralVectorField3 {
        let (a, b) = self.plan.forward_real_pair(&t[0], &t[1]);
        let (c, d) = self.plan.forward_real_pair(&t[2], &t[3]);
        let (e, f) = self.plan.forward_real_pair(&t[4], &t[5]);
        let hat = [a, b, c, d, e, f];
        const SLOT: [[usize; 3]; 3] = [[0, 3, 4], [3, 1, 5], [4, 5, 2]];
        self.divergence_of_tensor(|i, j| &hat[SLOT[i][j]])
    }

    fn divergence_of_tensor<'a, F>(&self, entry: F) -> SpectralVectorField3
    where
        F: Fn(usize, usize) -> &'a Vec<Complex64> + Sync,
    {
        let n = self.grid.n();
        let wn = &*self.wn;
        let mut out = SpectralVectorField3::zeros(self.grid);
        let iu = Complex64::new(0.0, 1.0);
        self.map_modes(&mut out, |i, j, k, v| {
            if !wn.kept(i, j, k) {
                return;
            }
            let idx = (i * n + j) * n + k;
            let kv = wn.kappa_vec(i, j, k);
            for (c, slot) in v.iter_mut().enumerate() {
                let s =
                    kv[0] * entry(c, 0)[idx] + kv[1] * entry(c, 1)[idx] + kv[2] * entry(c, 2)[idx];
                *slot = iu * s;
            }
        });
        out
    }

    /// `Σ_k a(k)·conj(b(k))` scaled to the physical inner product `∫ a·b`.
    pub fn inner(&self, a: &SpectralVectorField3, b: &SpectralVectorField3) -> f64 {
        let n3 = self.grid.len() as f64;
        let mut acc = 0.0;
        for c in 0..3 {
            acc += a.coeffs[c]
                .par_iter()
                .zip(&b.coeffs[c])
                .map(|(x, y)| (x * y.conj()).re)
                .sum::<f64>();
        }
        acc * self.grid.cell_measure() / n3
    }

    /// `∫ |∇u|²`.
    pub fn dissipation(&self, u: &SpectralVectorField3) -> f64 {
        let n = self.grid.n();
        let wn = &*self.wn;
        let n3 = self.grid.len() as f64;
        let acc: f64 = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut s = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        let idx = (i * n + j) * n + k;
                        let kv = wn.kappa_vec(i, j, k);
                        let k2 = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
                        s += k2 * (0..3).map(|c| u.coeffs[c][idx].norm_sqr()).sum::<f64>();
                    }
                }
                s
            })
            .sum();
        acc * self.grid.cell_measure() / n3
    }
}

fn leray_mode(kv: [f64; 3], v: &mut [Complex64; 3]) {
    let k2 = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
    if k2 == 0.0 {
        return;
    }
    let dot = (kv[0] * v[0] + kv[1] * v[1] + kv[2] * v[2]) / k2;
    for c in 0..3 {
        v[c] -= kv[c] * dot;
    }
}

fn derivative_symbol(kv: [f64; 3], alpha: [u32; 3]) -> Complex64 {
    let mut m = Complex64::new(1.0, 0.0);
    for d in 0..3 {
        for _ in 0..alpha[d] {
            m *= Complex64::new(0.0, kv[d]);
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVectorField3 {
    grid: Grid,
    coeffs: [Vec<Complex64>; 3],
}

impl SpectralVectorField3 {
    pub fn zeros(grid: Grid) -> Self {
        let z = vec![Complex64::default(); grid.len()];
        Self {
            grid,
            coeffs: [z.clone(), z.clone(), z],
        }
    }

    pub fn from_coefficients(
        grid: Grid,
        coeffs: [Vec<Complex64>; 3],
    ) -> Result<Self, SpectralError> {
        for c in &coeffs {
            if c.len() != grid.len() {
                return Err(SpectralError::SizeMismatch {
                    expected: grid.len(),
                    found: c.len(),
                });
            }
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Vec<Complex64>; 3] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [Vec<Complex64>; 3] {
        &mut self.coeffs
    }

    pub fn into_coefficients(self) -> [Vec<Complex64>; 3] {
        self.coeffs
    }

    /// Largest `|û(m) - conj(û(-m))|`; zero for the transform of a real field.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n();
        let neg = |i: usize| (n - i) % n;
        let mut worst: f64 = 0.0;
        for c in &self.coeffs {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let a = c[(i * n + j) * n + k];
                        let b = c[(neg(i) * n + neg(j)) * n + neg(k)];
                        worst = worst.max((a - b.conj()).norm());
                    }
                }
            }
        }
        worst
    }

    /// `sqrt(Σ |û|²)` over all modes and components.
    pub fn l2_coefficients(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn axpy(&mut self, s: Complex64, other: &Self) {
        for c in 0..3 {
            for (a, b) in self.coeffs[c].iter_mut().zip(&other.coeffs[c]) {
                *a += s * b;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for c in self.coeffs.iter_mut() {
            for a in c.iter_mut() {
                *a *= s;
            }
        }
    }
}

/// Either representation of a vector field.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Physical(VectorField3),
    Spectral(SpectralVectorField3),
}

/// Maps a field to the other representation.
pub fn transform(f: &Field) -> Field {
    match f {
        Field::Physical(u) => Field::Spectral(Spectral::new(*u.grid()).forward(u)),
        Field::Spectral(s) => Field::Physical(Spectral::new(s.grid).inverse(s)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Multiplier {
    Heat { t: f64 },
    Leray,
    Derivative { alpha: [u32; 3] },
    DealiasMask,
}

impl Multiplier {
    pub fn apply(&self, u: &SpectralVectorField3) -> Result<SpectralVectorField3, SpectralError> {
        let ctx = Spectral::new(u.grid);
        let mut out = u.clone();
        match *self {
            Multiplier::Heat { t } => {
                if !(t >= 0.0) {
                    return Err(SpectralError::NegativeTime(t));
                }
                ctx.heat_in_place(&mut out, t);
            }
            Multiplier::Leray => ctx.leray_in_place(&mut out),
            Multiplier::Derivative { alpha } => ctx.derivative_in_place(&mut out, alpha),
            Multiplier::DealiasMask => ctx.dealias_in_place(&mut out),
        }
        Ok(out)
    }
}

pub fn leray_project(u: &SpectralVectorField3) -> SpectralVectorField3 {
    Multiplier::Leray
        .apply(u)
        .expect("Leray projection is total")
}

pub fn heat_propagate(
    u: &SpectralVectorField3,
    t: f64,
) -> Result<SpectralVectorField3, SpectralError> {
    Multiplier::Heat { t }.apply(u)
}

/// `(iκ)^α ℙ e^{-|k|² t} û`.
pub fn oseen_apply(
    u: &SpectralVectorField3,
    t: f64,
    alpha: [u32; 3],
) -> Result<SpectralVectorField3, SpectralError> {
    if !(t > 0.0) {
        return Err(SpectralError::NonPositiveTime(t));
    }
    let order: u32 = alpha.iter().sum();
    if order > 2 {
        return Err(SpectralError::DerivativeOrder(order));
    }
    let ctx = Spectral::new(u.grid);
    let mut out = u.clone();
    ctx.heat_in_place(&mut out, t);
    ctx.leray_in_place(&mut out);
    ctx.derivative_in_place(&mut out, alpha);
    Ok(out)
}

/// Dealiased `∇·(u⊗v)`, component `i` being `Σ_j ∂_j(u_i v_j)`.
pub fn advection_divergence(
    u: &VectorField3,
    v: &VectorField3,
) -> Result<VectorField3, SpectralError> {
    if u.grid() != v.grid() {
        return Err(GridError::GridMismatch.into());
    }
    let ctx = Spectral::new(*u.grid());
    let um = ctx.dealias_physical(u);
    let vm = ctx.dealias_physical(v);
    Ok(ctx.inverse(&ctx.div_products(&um, &vm)))
}
