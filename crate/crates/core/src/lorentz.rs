//! Lorentz quasinorms of grid fields, computed exactly.
//!
//! A grid field is piecewise constant on cells of measure `h³`, so its
//! distribution function `d(α) = |{|f| > α}|` is a step function with one
//! step per distinct magnitude. Both the `q < ∞` integral
//! `(p ∫ α^q d(α)^{q/p} dα/α)^{1/q}` and the `q = ∞` supremum
//! `sup α d(α)^{1/p}` are evaluated in closed form on those steps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid, GridError, ScalarField, VectorField3};
use crate::spectral::fft;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LorentzError {
    #[error("Lorentz index needs p > 1 and q > 1 (or q = ∞), got p = {p}, q = {q:?}")]
    BadIndex { p: f64, q: Option<f64> },
    #[error("distribution level must be nonnegative, got {0}")]
    NegativeLevel(f64),
    #[error("level split needs delta > 0 and t > 0, got delta = {delta}, t = {t}")]
    BadSplit { delta: f64, t: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Second Lorentz exponent; `Infinite` selects the weak-type quasinorm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SecondIndex {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzIndex {
    p: f64,
    q: SecondIndex,
}

impl LorentzIndex {
    pub fn new(p: f64, q: SecondIndex) -> Result<Self, LorentzError> {
        let ok_p = p.is_finite() && p > 1.0;
        let ok_q = match q {
            SecondIndex::Finite(q) => q.is_finite() && q > 1.0,
            SecondIndex::Infinite => true,
        };
        if ok_p && ok_q {
            Ok(Self { p, q })
        } else {
            Err(LorentzError::BadIndex { p, q: q.finite() })
        }
    }

    pub fn finite(p: f64, q: f64) -> Result<Self, LorentzError> {
        Self::new(p, SecondIndex::Finite(q))
    }

    pub fn weak(p: f64) -> Result<Self, LorentzError> {
        Self::new(p, SecondIndex::Infinite)
    }

    /// `q = None` means `q = ∞`.
    pub fn from_option(p: f64, q: Option<f64>) -> Result<Self, LorentzError> {
        Self::new(p, q.map_or(SecondIndex::Infinite, SecondIndex::Finite))
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> SecondIndex {
        self.q
    }
}

impl SecondIndex {
    pub fn finite(self) -> Option<f64> {
        match self {
            SecondIndex::Finite(q) => Some(q),
            SecondIndex::Infinite => None,
        }
    }
}

/// Anything whose pointwise magnitude `|f|` lives on a grid.
pub trait Magnitudes {
    fn grid(&self) -> &Grid;
    fn magnitudes(&self) -> Vec<f64>;
}

impl Magnitudes for VectorField3 {
    fn grid(&self) -> &Grid {
        VectorField3::grid(self)
    }
    fn magnitudes(&self) -> Vec<f64> {
        VectorField3::magnitudes(self)
    }
}

impl Magnitudes for ScalarField {
    fn grid(&self) -> &Grid {
        ScalarField::grid(self)
    }
    fn magnitudes(&self) -> Vec<f64> {
        self.values().iter().map(|v| v.abs()).collect()
    }
}

/// Step representation of a distribution function.
///
/// `levels[k]` are the distinct magnitudes in strictly decreasing order and
/// `measures[k]` is the measure of `{|f| >= levels[k]}`, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSummary {
    levels: Vec<f64>,
    measures: Vec<f64>,
}

impl DistributionSummary {
    pub fn from_magnitudes(mut mags: Vec<f64>, cell_measure: f64) -> Self {
        mags.sort_unstable_by(|a, b| b.total_cmp(a));
        let mut levels = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for (i, &v) in mags.iter().enumerate() {
            if levels.last() == Some(&v) {
                *counts.last_mut().unwrap() = i + 1;
            } else {
                levels.push(v);
                counts.push(i + 1);
            }
        }
        let measures = counts
            .into_iter()
            .map(|c| c as f64 * cell_measure)
            .collect();
        Self { levels, measures }
    }

    pub fn of<F: Magnitudes + ?Sized>(field: &F) -> Self {
        Self::from_magnitudes(field.magnitudes(), field.grid().cell_measure())
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    /// Number of distinct magnitudes.
    pub fn breakpoints(&self) -> usize {
        self.levels.len()
    }

    /// `d(α)`: measure of `{|f| > α}`.
    pub fn distribution(&self, alpha: f64) -> Result<f64, LorentzError> {
        if !(alpha >= 0.0) {
            return Err(LorentzError::NegativeLevel(alpha));
        }
        // levels are descending; count those strictly above alpha
        let above = self.levels.partition_point(|&v| v > alpha);
        Ok(if above == 0 {
            0.0
        } else {
            self.measures[above - 1]
        })
    }

    /// Measure of the superlevel set `{|f| >= threshold}`.
    pub fn superlevel_measure(&self, threshold: f64) -> f64 {
        let at_or_above = self.levels.partition_point(|&v| v >= threshold);
        if at_or_above == 0 {
            0.0
        } else {
            self.measures[at_or_above - 1]
        }
    }

    pub fn quasinorm(&self, idx: LorentzIndex) -> f64 {
        let p = idx.p;
        match idx.q {
            // On [v_{k+1}, v_k) the distribution equals μ_k, so the sup is
            // approached from the left at each breakpoint.
            SecondIndex::Infinite => self
                .levels
                .iter()
                .zip(&self.measures)
                .map(|(v, mu)| v * mu.powf(1.0 / p))
                .fold(0.0, f64::max),
            SecondIndex::Finite(q) => {
                // p ∫ α^{q-1} d^{q/p} dα = (p/q) Σ_k v_k^q (μ_k^{q/p} - μ_{k-1}^{q/p})
                let mut prev = 0.0;
                let mut acc = 0.0;
                for (v, mu) in self.levels.iter().zip(&self.measures) {
                    let cur = mu.powf(q / p);
                    acc += v.powf(q) * (cur - prev);
                    prev = cur;
                }
                (p / q * acc).powf(1.0 / q)
            }
        }
    }
}

pub fn distribution_function<F: Magnitudes + ?Sized>(
    field: &F,
    alpha: f64,
) -> Result<f64, LorentzError> {
    if !(alpha >= 0.0) {
        return Err(LorentzError::NegativeLevel(alpha));
    }
    let count = field.magnitudes().iter().filter(|&&v| v > alpha).count();
    Ok(count as f64 * field.grid().cell_measure())
}

pub fn lorentz_quasinorm<F: Magnitudes + ?Sized>(field: &F, idx: LorentzIndex) -> f64 {
    DistributionSummary::of(field).quasinorm(idx)
}

/// `‖f‖_{L^{3,∞}}`.
pub fn weak_l3<F: Magnitudes + ?Sized>(field: &F) -> f64 {
    lorentz_quasinorm(field, LorentzIndex::weak(3.0).unwrap())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzReport {
    pub p: f64,
    /// `None` encodes `q = ∞` (serialized as `null`).
    pub q: Option<f64>,
    pub value: f64,
    pub breakpoints_count: usize,
}

impl LorentzReport {
    pub fn compute<F: Magnitudes + ?Sized>(field: &F, idx: LorentzIndex) -> Self {
        let summary = DistributionSummary::of(field);
        Self {
            p: idx.p,
            q: idx.q.finite(),
            value: summary.quasinorm(idx),
            breakpoints_count: summary.breakpoints(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// `U = U_low + U_high` at threshold `δ/√t`, with the two bounds of the
/// splitting checked on the actual fields.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub low: VectorField3,
    pub high: VectorField3,
    pub threshold: f64,
    /// `max |U_low|`, always `< threshold`.
    pub low_sup: f64,
    /// Measure of `S_t = {|U| >= threshold}`.
    pub superlevel_measure: f64,
    /// `(√t/δ)³ ‖U‖³_{L^{3,∞}}`.
    pub superlevel_bound: f64,
    pub weak_norm: f64,
    pub high_weak_norm: f64,
}

impl SplitPair {
    pub fn low_bound_holds(&self) -> bool {
        self.low_sup <= self.threshold
    }

    pub fn superlevel_bound_holds(&self) -> bool {
        self.superlevel_measure <= self.superlevel_bound * (1.0 + 1e-12)
    }

    pub fn superlevel_slack(&self) -> f64 {
        self.superlevel_bound - self.superlevel_measure
    }
}

pub fn level_split(u: &VectorField3, delta: f64, t: f64) -> Result<SplitPair, LorentzError> {
    if !(delta > 0.0 && t > 0.0 && delta.is_finite() && t.is_finite()) {
        return Err(LorentzError::BadSplit { delta, t });
    }
    let threshold = delta / t.sqrt();
    let grid = *u.grid();
    let mags = u.magnitudes();
    let mut low = [
        vec![0.0; grid.len()],
        vec![0.0; grid.len()],
        vec![0.0; grid.len()],
    ];
    let mut high = low.clone();
    let mut low_sup: f64 = 0.0;
    for (idx, &m) in mags.iter().enumerate() {
        // ties belong to the high part
        let target = if m >= threshold {
            &mut high
        } else {
            low_sup = low_sup.max(m);
            &mut low
        };
        for c in 0..3 {
            target[c][idx] = u.component(c)[idx];
        }
    }
    let summary = DistributionSummary::from_magnitudes(mags, grid.cell_measure());
    let weak = summary.quasinorm(LorentzIndex::weak(3.0).unwrap());
    let superlevel_measure = summary.superlevel_measure(threshold);
    let low = VectorField3::from_components_unchecked(grid, low);
    let high = VectorField3::from_components_unchecked(grid, high);
    let high_weak_norm = weak_l3(&high);
    Ok(SplitPair {
        low,
        high,
        threshold,
        low_sup,
        superlevel_measure,
        superlevel_bound: (t.sqrt() / delta).powi(3) * weak.powi(3),
        weak_norm: weak,
        high_weak_norm,
    })
}

/// Periodic convolution `Σ_y f(x - y) g(y) h³`, a discretization of `∫ f(x-y) g(y) dy`.
pub fn convolve(f: &ScalarField, g: &ScalarField) -> Result<ScalarField, LorentzError> {
    if f.grid() != g.grid() {
        return Err(GridError::GridMismatch.into());
    }
    let grid = *f.grid();
    let plan = fft::plan(grid.n());
    let mut fh = fft::real_to_complex(f.values());
    let mut gh = fft::real_to_complex(g.values());
    plan.forward(&mut fh);
    plan.forward(&mut gh);
    // Node positions carry a -L/2 origin shift, so f(x_i - y_j) lives at index
    // (i - j + n/2) mod n along each axis.
    let n = grid.n();
    for (a, b) in fh.iter_mut().zip(&gh) {
        *a *= b;
    }
    plan.inverse(&mut fh);
    let h3 = grid.cell_measure();
    let half = n / 2;
    let mut out = vec![0.0; grid.len()];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                // (f*g)[m] with m = i + j' where the node of index i is x_i;
                // x_i - y_j = x_{i-j} + L/2 → index shift by n/2
                let src = grid.index((i + half) % n, (j + half) % n, (k + half) % n);
                out[grid.index(i, j, k)] = fh[src].re * h3;
            }
        }
    }
    Ok(ScalarField::new_unchecked(grid, out))
}
