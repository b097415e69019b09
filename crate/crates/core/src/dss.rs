//! Discretely self-similar data `λu₀(λx) = u₀(x)` built from a profile on the
//! annulus `{1 ≤ |x| ≤ λ}`, the two annulus-norm inequalities tying
//! `∫_{1≤|x|≤λ}|u₀|³` to `‖u₀‖_{3,∞}`, and the rescaled non-decay series.

use std::f64::consts::PI;
use std::io;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{sample_field, Grid, GridError, VectorField3};
use crate::lorentz::weak_l3;
use crate::mild_solver::SolutionTrajectory;
use crate::spectral::Spectral;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DssError {
    #[error("scale factor must exceed 1, got {0}")]
    BadLambda(f64),
    #[error("amplitude must be finite and nonnegative, got {0}")]
    BadAmplitude(f64),
    #[error("shell range {k_min}..={k_max} is empty")]
    EmptyRange { k_min: i32, k_max: i32 },
    #[error(
        "shells not resolved: need λ^k_min = {inner} >= 4h = {min_inner}, λ^(k_max+1) = {outer} <= L/2 = {max_outer}, and at least 3 shells (got {shells})"
    )]
    Unresolved {
        inner: f64,
        min_inner: f64,
        outer: f64,
        max_outer: f64,
        shells: usize,
    },
    #[error("profile fails the divergence check: relative divergence {0}")]
    ProfileNotSolenoidal(f64),
    #[error("trajectory does not reach t = {needed} (ends at {available})")]
    HorizonTooShort { needed: f64, available: f64 },
    #[error("trajectory has no sample at t = {0}")]
    MissingTime(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// A vector field supported in the open annulus `1 < |y| < λ`.
pub trait DssProfile: Send + Sync {
    fn value(&self, y: [f64; 3]) -> [f64; 3];
}

/// `ũ(y) = -(b'(ρ)/ρ)(-y₂, y₁, 0) / N`, the curl of the potential `b(ρ) e₃`
/// with `b' = (1-ξ²)⁶` in the shell coordinate `ξ = (2ρ-1-λ)/(λ-1)`,
/// normalized to unit `L³` norm.
///
/// Only `b'` needs compact support: `b` is constant past `λ` and its curl
/// vanishes there. A single-signed `b'` keeps the swirl radially wide, which
/// is what lets the outer shells survive diffusion over a cycle.
/// `|ũ| = |b'(ρ)| sin θ / N`, so the distribution function of the profile
/// reduces to a radial quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwirlBump {
    lambda: f64,
    norm: f64,
}

const RADIAL_NODES: usize = 4000;

impl SwirlBump {
    pub fn new(lambda: f64) -> Result<Self, DssError> {
        if !(lambda > 1.0 && lambda.is_finite()) {
            return Err(DssError::BadLambda(lambda));
        }
        let mut s = Self { lambda, norm: 1.0 };
        s.norm = s.raw_cube_integral().cbrt();
        Ok(s)
    }

    /// `b'(ρ)`, zero outside `(1, λ)`.
    fn db(&self, rho: f64) -> f64 {
        let half = 0.5 * (self.lambda - 1.0);
        let xi = (rho - 1.0 - half) / half;
        let s = 1.0 - xi * xi;
        if s <= 0.0 {
            return 0.0;
        }
        s.powi(6)
    }

    /// Midpoint nodes and weights on `(1, λ)`.
    fn radial_nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = (self.lambda - 1.0) / RADIAL_NODES as f64;
        (0..RADIAL_NODES).map(move |i| (1.0 + (i as f64 + 0.5) * h, h))
    }

    /// `∫|b'|³ ρ² dρ · ∫ sin³θ dΩ` before normalization.
    fn raw_cube_integral(&self) -> f64 {
        let radial: f64 = self
            .radial_nodes()
            .map(|(r, w)| self.db(r).abs().powi(3) * r * r * w)
            .sum();
        // ∫ sin³θ dΩ = 2π ∫ sin⁴θ dθ = 3π²/4
        radial * 0.75 * PI * PI
    }

    /// `∫_{1≤|y|≤λ} |ũ|³`, equal to one up to quadrature error.
    pub fn cube_integral(&self) -> f64 {
        self.raw_cube_integral() / self.norm.powi(3)
    }

    /// `|{|ũ| > β}| = 4π ∫ ρ² √(1 - β²/|b'/N|²)₊ dρ`.
    pub fn distribution(&self, beta: f64) -> f64 {
        4.0 * PI
            * self
                .radial_nodes()
                .map(|(r, w)| {
                    let m = self.db(r).abs() / self.norm;
                    if m > beta {
                        r * r * (1.0 - (beta / m).powi(2)).sqrt() * w
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.radial_nodes()
            .map(|(r, _)| self.db(r).abs())
            .fold(0.0, f64::max)
            / self.norm
    }
}

impl DssProfile for SwirlBump {
    fn value(&self, y: [f64; 3]) -> [f64; 3] {
        let rho = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        let g = -self.db(rho) / (rho * self.norm);
        [-g * y[1], g * y[0], 0.0]
    }
}

#[derive(Clone)]
pub struct DssParams {
    pub lambda: f64,
    pub amplitude: f64,
    pub k_min: i32,
    pub k_max: i32,
    pub profile: Arc<dyn DssProfile>,
}

impl std::fmt::Debug for DssParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DssParams")
            .field("lambda", &self.lambda)
            .field("amplitude", &self.amplitude)
            .field("k_min", &self.k_min)
            .field("k_max", &self.k_max)
            .finish_non_exhaustive()
    }
}

impl DssParams {
    /// Default swirl profile.
    pub fn new(lambda: f64, amplitude: f64, k_min: i32, k_max: i32) -> Result<Self, DssError> {
        let profile = Arc::new(SwirlBump::new(lambda)?);
        Self::with_profile(lambda, amplitude, k_min, k_max, profile)
    }

    /// A user profile, accepted only if its central-difference divergence at
    /// seeded annulus points stays below `1e-5` of its gradient scale.
    pub fn with_profile(
        lambda: f64,
        amplitude: f64,
        k_min: i32,
        k_max: i32,
        profile: Arc<dyn DssProfile>,
    ) -> Result<Self, DssError> {
        if !(lambda > 1.0 && lambda.is_finite()) {
            return Err(DssError::BadLambda(lambda));
        }
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(DssError::BadAmplitude(amplitude));
        }
        if k_max < k_min {
            return Err(DssError::EmptyRange { k_min, k_max });
        }
        let rel = profile_divergence(profile.as_ref(), lambda);
        if !(rel <= 1e-5) {
            return Err(DssError::ProfileNotSolenoidal(rel));
        }
        Ok(Self {
            lambda,
            amplitude,
            k_min,
            k_max,
            profile,
        })
    }

    pub fn shells(&self) -> usize {
        (self.k_max - self.k_min + 1) as usize
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, DssError> {
        let mut p = self.clone();
        p.amplitude *= factor;
        if !(p.amplitude >= 0.0 && p.amplitude.is_finite()) {
            return Err(DssError::BadAmplitude(p.amplitude));
        }
        Ok(p)
    }
}

/// `max |∇·ũ| (λ-1) / max |ũ|` from fourth-order central differences at 200
/// seeded points.
fn profile_divergence(profile: &dyn DssProfile, lambda: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let h = 1e-3 * (lambda - 1.0);
    let mut div: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for _ in 0..200 {
        let r = rng.gen_range(1.0..lambda);
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi = rng.gen_range(0.0..2.0 * PI);
        let s = (1.0 - z * z).sqrt();
        let x = [r * s * phi.cos(), r * s * phi.sin(), r * z];
        let mut d = 0.0;
        for a in 0..3 {
            let at = |s: f64| {
                let mut y = x;
                y[a] += s * h;
                profile.value(y)[a]
            };
            d += (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h);
        }
        div = div.max(d.abs());
        let v = profile.value(x);
        scale = scale.max((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt());
    }
    if scale == 0.0 {
        0.0
    } else {
        div * (lambda - 1.0) / scale
    }
}

/// Shell index `k` with `λ^k ≤ |x| < λ^{k+1}`.
fn shell_of(rho: f64, lambda: f64) -> i32 {
    (rho.ln() / lambda.ln()).floor() as i32
}

/// The truncated extension `λ^{-k} M ũ(λ^{-k}x)` on realized shells.
pub fn dss_value(x: [f64; 3], params: &DssParams) -> [f64; 3] {
    let rho = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if rho == 0.0 {
        return [0.0; 3];
    }
    let k = shell_of(rho, params.lambda);
    if k < params.k_min || k > params.k_max {
        return [0.0; 3];
    }
    let s = params.lambda.powi(-k);
    let v = params.profile.value([x[0] * s, x[1] * s, x[2] * s]);
    let c = params.amplitude * s;
    [c * v[0], c * v[1], c * v[2]]
}

#[derive(Debug, Clone)]
pub struct DssField {
    pub params: DssParams,
    pub field: VectorField3,
    pub weak_norm: f64,
    /// `‖u₀‖_{3,∞} / M`.
    pub amplitude_ratio: f64,
    /// `‖∇·u₀‖_{L²} / ‖∇u₀‖_{L²}` with spectral derivatives.
    pub divergence_relative: f64,
}

impl DssField {
    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }
}

/// `‖∇·u‖_{L²} / ‖∇u‖_{L²}`, both spectral.
pub fn relative_divergence(u: &VectorField3) -> f64 {
    let ctx = Spectral::new(*u.grid());
    let s = ctx.forward(u);
    let div: f64 = ctx.divergence(&s).iter().map(|c| c.norm_sqr()).sum::<f64>();
    let grad = ctx.dissipation(&s) * u.grid().len() as f64 / u.grid().cell_measure();
    if grad == 0.0 {
        0.0
    } else {
        (div / grad).sqrt()
    }
}

pub fn make_dss_data(grid: Grid, params: &DssParams) -> Result<DssField, DssError> {
    let inner = params.lambda.powi(params.k_min);
    let outer = params.lambda.powi(params.k_max + 1);
    let (min_inner, max_outer) = (4.0 * grid.spacing(), 0.5 * grid.box_len());
    if !(inner >= min_inner * (1.0 - 1e-12)
        && outer <= max_outer * (1.0 + 1e-12)
        && params.shells() >= 3)
    {
        return Err(DssError::Unresolved {
            inner,
            min_inner,
            outer,
            max_outer,
            shells: params.shells(),
        });
    }
    let field = sample_field(grid, [0.0; 3], |x| dss_value(x, params))?;
    let weak_norm = weak_l3(&field);
    let amplitude_ratio = if params.amplitude > 0.0 {
        weak_norm / params.amplitude
    } else {
        0.0
    };
    let divergence_relative = relative_divergence(&field);
    Ok(DssField {
        params: params.clone(),
        field,
        weak_norm,
        amplitude_ratio,
        divergence_relative,
    })
}

/// Smooth control for the non-decay comparison: the innermost realized shell
/// alone, rescaled so its weak-`L³` norm equals `target`. Compactly supported,
/// so it lies in `L³` and its caloric extension decays.
pub fn single_shell_control(
    grid: Grid,
    params: &DssParams,
    target: f64,
) -> Result<VectorField3, DssError> {
    let inner = params.lambda.powi(params.k_min);
    let outer = inner * params.lambda;
    let (min_inner, max_outer) = (4.0 * grid.spacing(), 0.5 * grid.box_len());
    if !(inner >= min_inner * (1.0 - 1e-12) && outer <= max_outer * (1.0 + 1e-12)) {
        return Err(DssError::Unresolved {
            inner,
            min_inner,
            outer,
            max_outer,
            shells: 1,
        });
    }
    if !(target >= 0.0 && target.is_finite()) {
        return Err(DssError::BadAmplitude(target));
    }
    let mut one = params.clone();
    one.k_max = one.k_min;
    let field = sample_field(grid, [0.0; 3], |x| dss_value(x, &one))?;
    let w = weak_l3(&field);
    Ok(if w > 0.0 { field.scaled(target / w) } else { field })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityLine {
    pub lambda: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub holds: bool,
}

impl InequalityLine {
    fn new(lambda: f64, lhs: f64, norm_side: f64, constant: f64) -> Self {
        let rhs = constant * norm_side;
        Self {
            lambda,
            lhs,
            rhs,
            constant,
            holds: lhs <= rhs,
        }
    }

    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// `∫_{1≤|x|≤λ}|u₀|³ ≤ 3(λ-1)² ‖u₀‖³_{3,∞}` and
/// `‖u₀‖³_{3,∞} ≤ λ³/(3(λ-1)) ∫_{1≤|x|≤λ}|u₀|³`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnulusReport {
    pub annulus_vs_weak: InequalityLine,
    pub weak_vs_annulus: InequalityLine,
    /// Shell on which the annulus integral was taken (the integral is the
    /// same on every shell of an exact DSS field).
    pub shell: Option<i32>,
}

impl AnnulusReport {
    fn from_values(lambda: f64, annulus: f64, weak_cubed: f64, shell: Option<i32>) -> Self {
        Self {
            annulus_vs_weak: InequalityLine::new(
                lambda,
                annulus,
                weak_cubed,
                3.0 * (lambda - 1.0).powi(2),
            ),
            weak_vs_annulus: InequalityLine::new(
                lambda,
                weak_cubed,
                annulus,
                lambda.powi(3) / (3.0 * (lambda - 1.0)),
            ),
            shell,
        }
    }

    pub fn both_hold(&self) -> bool {
        self.annulus_vs_weak.holds && self.weak_vs_annulus.holds
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&[&self.annulus_vs_weak, &self.weak_vs_annulus])
            .expect("plain numbers serialize")
    }
}

/// Both inequalities on the sampled field, with the annulus integral taken
/// over the outermost realized shell rescaled to `{1 ≤ |x| ≤ λ}`.
pub fn annulus_inequalities(u0: &DssField, lambda: f64) -> Result<AnnulusReport, DssError> {
    if !(lambda > 1.0) {
        return Err(DssError::BadLambda(lambda));
    }
    let grid = *u0.grid();
    let k = u0.params.k_max;
    let mut integral = 0.0;
    for idx in 0..grid.len() {
        let (i, j, kk) = grid.unravel(idx);
        let x = grid.node(i, j, kk, [0.0; 3]);
        let rho = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if rho > 0.0 && shell_of(rho, u0.params.lambda) == k {
            let v = u0.field.at(idx);
            integral += (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).powf(1.5);
        }
    }
    integral *= grid.cell_measure();
    Ok(AnnulusReport::from_values(
        lambda,
        integral,
        u0.weak_norm.powi(3),
        Some(k),
    ))
}

/// Weak-`L³` norm of the untruncated extension of the default profile,
/// from `d(α) = Σ_k λ^{3k} d̃(λ^k α)` maximized over one period in `ln α`.
pub fn exact_weak_norm(lambda: f64, amplitude: f64) -> Result<f64, DssError> {
    let profile = SwirlBump::new(lambda)?;
    Ok(amplitude * exact_weak_cubed(&profile).cbrt())
}

fn exact_weak_cubed(profile: &SwirlBump) -> f64 {
    let lambda = profile.lambda;
    let top = profile.max_magnitude();
    let samples = 400;
    let mut best: f64 = 0.0;
    for s in 0..samples {
        // α ranges over one period just below the largest value
        let alpha = top * lambda.powf(-(s as f64 + 0.5) / samples as f64);
        let mut total = 0.0;
        let mut k = 0i32;
        loop {
            let beta = alpha * lambda.powi(k);
            if beta >= top {
                k -= 1;
                if k < -60 {
                    break;
                }
                continue;
            }
            let term = beta.powi(3) * profile.distribution(beta);
            total += term;
            if term < 1e-16 * total || k < -60 {
                break;
            }
            k -= 1;
        }
        best = best.max(total);
    }
    best
}

/// Both inequalities for the exact (untruncated) DSS extension of the
/// default profile, evaluated by quadrature. Usable for any `λ > 1`, also
/// where the grid cannot resolve three shells.
pub fn exact_annulus_inequalities(lambda: f64, amplitude: f64) -> Result<AnnulusReport, DssError> {
    let profile = SwirlBump::new(lambda)?;
    let m3 = amplitude.powi(3);
    Ok(AnnulusReport::from_values(
        lambda,
        m3 * profile.cube_integral(),
        m3 * exact_weak_cubed(&profile),
        None,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescaledRow {
    pub k: u32,
    pub t: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescaledSeries {
    pub rows: Vec<RescaledRow>,
    /// Set when `‖u(t0)‖_{3,∞} = 0`; the series is then empty.
    pub zero_norm: bool,
}

impl RescaledSeries {
    pub fn write_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        // header written by hand so an empty series still has one
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        out.write_record(["k", "t", "ratio"])?;
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn weak_at(traj: &SolutionTrajectory, t: f64) -> Result<f64, DssError> {
    traj.times
        .iter()
        .position(|&s| (s - t).abs() <= 1e-9 * t.max(1.0))
        .map(|i| traj.series[i].l3winf)
        .ok_or(DssError::MissingTime(t))
}

/// `r_k = ‖u(λ^{2k} t0)‖_{3,∞} / ‖u(t0)‖_{3,∞}` for every `k ≥ 1` inside the
/// trajectory.
pub fn rescaled_norm_series(
    traj: &SolutionTrajectory,
    lambda: f64,
    t0: f64,
) -> Result<RescaledSeries, DssError> {
    if !(lambda > 1.0) {
        return Err(DssError::BadLambda(lambda));
    }
    let end = *traj.times.last().unwrap_or(&0.0);
    let first = t0 * lambda * lambda;
    if first > end * (1.0 + 1e-9) {
        return Err(DssError::HorizonTooShort {
            needed: first,
            available: end,
        });
    }
    let base = weak_at(traj, t0)?;
    if base == 0.0 {
        return Ok(RescaledSeries {
            rows: Vec::new(),
            zero_norm: true,
        });
    }
    let mut rows = Vec::new();
    let mut k = 1u32;
    loop {
        let t = t0 * lambda.powi(2 * k as i32);
        if t > end * (1.0 + 1e-9) {
            break;
        }
        rows.push(RescaledRow {
            k,
            t,
            ratio: weak_at(traj, t)? / base,
        });
        k += 1;
    }
    Ok(RescaledSeries {
        rows,
        zero_norm: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landau::annulus_points;

    #[test]
    fn profile_normalization_and_support() {
        for lambda in [1.5, 2.0, 4.0] {
            let p = SwirlBump::new(lambda).unwrap();
            assert!((p.cube_integral() - 1.0).abs() < 1e-12);
            assert_eq!(p.value([0.0, 0.0, 0.5]), [0.0; 3]);
            assert_eq!(p.value([lambda * 1.01, 0.0, 0.0]), [0.0; 3]);
            // layer cake: ∫|ũ|³ = 3∫β² d̃(β) dβ
            let top = p.max_magnitude();
            let m = 2000;
            let h = top / m as f64;
            let lc: f64 = (0..m)
                .map(|i| {
                    let b = (i as f64 + 0.5) * h;
                    3.0 * b * b * p.distribution(b) * h
                })
                .sum();
            assert!((lc - 1.0).abs() < 1e-4, "{lambda}: {lc}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(DssParams::new(1.0, 1.0, 0, 2), Err(DssError::BadLambda(_))));
        assert!(matches!(DssParams::new(2.0, -1.0, 0, 2), Err(DssError::BadAmplitude(_))));
        assert!(matches!(DssParams::new(2.0, 1.0, 3, 2), Err(DssError::EmptyRange { .. })));
        struct Radial;
        impl DssProfile for Radial {
            fn value(&self, y: [f64; 3]) -> [f64; 3] {
                let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
                let b = if r > 1.0 && r < 2.0 { (-1.0 / ((r - 1.0) * (2.0 - r))).exp() } else { 0.0 };
                [b * y[0], b * y[1], b * y[2]]
            }
        }
        assert!(matches!(
            DssParams::with_profile(2.0, 1.0, 0, 2, Arc::new(Radial)),
            Err(DssError::ProfileNotSolenoidal(_))
        ));
        let g = Grid::new(32, 32.0).unwrap();
        let p = DssParams::new(2.0, 1.0, 1, 3).unwrap();
        assert!(matches!(make_dss_data(g, &p), Err(DssError::Unresolved { .. })));
    }

    #[test]
    fn scaling_relation_at_interior_points() {
        let p = DssParams::new(2.0, 0.7, -3, 6).unwrap();
        let mut worst: f64 = 0.0;
        for x in annulus_points(1.0, 16.0, 1000, 4) {
            let a = dss_value(x, &p);
            let b = dss_value([2.0 * x[0], 2.0 * x[1], 2.0 * x[2]], &p);
            for c in 0..3 {
                worst = worst.max((2.0 * b[c] - a[c]).abs());
            }
        }
        assert!(worst <= 1e-6, "{worst}");
    }

    #[test]
    fn grid_field_homogeneity_and_inequalities() {
        let g = Grid::new(64, 64.0).unwrap();
        let p = DssParams::new(2.0, 1.0, 2, 4).unwrap();
        let f = make_dss_data(g, &p).unwrap();
        let f2 = make_dss_data(g, &p.scaled(2.0).unwrap()).unwrap();
        assert!((f2.weak_norm - 2.0 * f.weak_norm).abs() <= 1e-10 * f.weak_norm);
        let r = annulus_inequalities(&f, 2.0).unwrap();
        assert!(r.both_hold(), "{r:?}");
        assert_eq!(r.annulus_vs_weak.constant, 3.0);
        assert!((r.weak_vs_annulus.constant - 8.0 / 3.0).abs() < 1e-15);
        assert!(r.to_json().contains("\"holds\": true"));
        let zero = make_dss_data(g, &p.scaled(0.0).unwrap()).unwrap();
        let z = annulus_inequalities(&zero, 2.0).unwrap();
        assert_eq!((z.annulus_vs_weak.lhs, z.annulus_vs_weak.rhs), (0.0, 0.0));
        assert!(z.both_hold());
    }

    #[test]
    fn exact_profile_inequalities() {
        for lambda in [2.0, 4.0] {
            let r = exact_annulus_inequalities(lambda, 1.0).unwrap();
            assert!(r.both_hold(), "{lambda}: {r:?}");
        }
        let r = exact_annulus_inequalities(4.0, 1.0).unwrap();
        assert_eq!(r.annulus_vs_weak.constant, 27.0);
        assert!((r.weak_vs_annulus.constant - 64.0 / 9.0).abs() < 1e-14);
        // the second inequality holds for every λ
        let r = exact_annulus_inequalities(1.5, 1.0).unwrap();
        assert!(r.weak_vs_annulus.holds);
    }

    #[test]
    fn sampled_norm_tracks_exact_extension() {
        let g = Grid::new(128, 64.0).unwrap();
        let p = DssParams::new(2.0, 1.0, 1, 4).unwrap();
        let f = make_dss_data(g, &p).unwrap();
        let exact = exact_weak_norm(2.0, 1.0).unwrap();
        assert!((f.weak_norm / exact - 1.0).abs() < 0.1, "{} vs {exact}", f.weak_norm);
    }

    #[test]
    fn rescaled_series_of_exact_rescaling() {
        let g = Grid::new(32, 32.0).unwrap();
        let p = DssParams::new(2.0, 1.0, 1, 3).unwrap();
        let u = sample_field(g, [0.0; 3], |x| dss_value(x, &p)).unwrap();
        // the same snapshot relabelled at t0 and λ²t0
        let traj = SolutionTrajectory::from_snapshots(
            vec![1.0, 4.0, 16.0],
            vec![u.clone(), u.clone(), u],
            None,
            &[4.0],
        )
        .unwrap();
        let s = rescaled_norm_series(&traj, 2.0, 1.0).unwrap();
        assert_eq!(s.rows.len(), 2);
        assert!(s.rows.iter().all(|r| (r.ratio - 1.0).abs() <= 1e-10));
        assert!(matches!(
            rescaled_norm_series(&traj, 2.0, 8.0),
            Err(DssError::HorizonTooShort { .. })
        ));
        let z = VectorField3::zeros(g);
        let traj = SolutionTrajectory::from_snapshots(vec![1.0, 4.0], vec![z.clone(), z], None, &[4.0]).unwrap();
        let s = rescaled_norm_series(&traj, 2.0, 1.0).unwrap();
        assert!(s.zero_norm && s.rows.is_empty());
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "k,t,ratio\n");
    }
}
