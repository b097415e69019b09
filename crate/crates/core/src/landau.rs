//! Landau jets: the closed form, a mollified periodic background built from
//! it, and finite-difference checks that the formula solves the stationary
//! equations away from the origin.
//!
//! In spherical coordinates about the axis, with `c = cos θ`,
//!
//! ```text
//! u_ρ = (2/ρ)((a²-1)/(a-c)² - 1),   u_θ = -2 sin θ / (ρ(a-c)),   u_φ = 0.
//! ```
//!
//! The field has Stokes stream function `ψ = Φ(ρ) h(θ)` with `Φ = ρ` and
//! `h = 2 sin²θ/(a-c)`. The background keeps `h` and replaces `Φ` by a
//! cap `ρ² q(ρ)` near the origin and a smooth cutoff near the box faces,
//! so the sampled field is divergence-free before projection.

use std::f64::consts::PI;
use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{sample_field, Grid, GridError, VectorField3};
use crate::lorentz::weak_l3;
use crate::spectral::Spectral;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LandauError {
    #[error("Landau parameter must satisfy a > 1, got {0}")]
    BadParameter(f64),
    #[error("axis must be a unit vector, got {0:?}")]
    BadAxis([f64; 3]),
    #[error("velocity undefined at the origin")]
    Origin,
    #[error("r_cut = {r_cut} is below two grid spacings ({min})")]
    CutTooSmall { r_cut: f64, min: f64 },
    #[error("cutoff radii must satisfy 2 r_cut < taper_start < taper_end <= L/2, got {0:?}")]
    BadTaper((f64, f64)),
    #[error("annulus [{r_in}, {r_out}] must satisfy 0 < r_in < r_out < L/2 = {half}")]
    AnnulusOutsideBox { r_in: f64, r_out: f64, half: f64 },
    #[error("refinement needs at least one level")]
    NoLevels,
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandauParams {
    a: f64,
    axis: [f64; 3],
    flip_polar: bool,
}

impl LandauParams {
    pub fn new(a: f64, axis: [f64; 3]) -> Result<Self, LandauError> {
        if !(a > 1.0 && a.is_finite()) {
            return Err(LandauError::BadParameter(a));
        }
        let norm = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !((norm - 1.0).abs() <= 1e-12) {
            return Err(LandauError::BadAxis(axis));
        }
        Ok(Self {
            a,
            axis,
            flip_polar: false,
        })
    }

    /// Axis `e₃`.
    pub fn vertical(a: f64) -> Result<Self, LandauError> {
        Self::new(a, [0.0, 0.0, 1.0])
    }

    /// Fault injection: reverses the sign of the polar component so that
    /// the field stops solving the equations.
    pub fn with_flipped_polar(mut self) -> Self {
        self.flip_polar = true;
        self
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn axis(&self) -> [f64; 3] {
        self.axis
    }

    pub fn polar_flipped(&self) -> bool {
        self.flip_polar
    }
}

/// Velocity from the radial profiles `P = Φ/ρ²`, `Q = Φ'/ρ`.
fn velocity_from_profiles(x: [f64; 3], rho: f64, p: f64, q: f64, params: &LandauParams) -> [f64; 3] {
    let a = params.a;
    let ax = params.axis;
    let xh = [x[0] / rho, x[1] / rho, x[2] / rho];
    let c = (xh[0] * ax[0] + xh[1] * ax[1] + xh[2] * ax[2]).clamp(-1.0, 1.0);
    let d = a - c;
    let f = 2.0 * ((a * a - 1.0) / (d * d) - 1.0);
    let mut polar = 2.0 * q / d;
    if params.flip_polar {
        polar = -polar;
    }
    [0, 1, 2].map(|i| p * f * xh[i] - polar * (c * xh[i] - ax[i]))
}

pub fn landau_velocity(x: [f64; 3], params: &LandauParams) -> Result<[f64; 3], LandauError> {
    let rho = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if rho == 0.0 {
        return Err(LandauError::Origin);
    }
    Ok(velocity_from_profiles(x, rho, 1.0 / rho, 1.0 / rho, params))
}

/// `u_ρ` and `u_θ` at `(ρ, θ)`.
pub fn landau_spherical(rho: f64, theta: f64, params: &LandauParams) -> (f64, f64) {
    let (a, c, s) = (params.a, theta.cos(), theta.sin());
    let d = a - c;
    let ur = 2.0 / rho * ((a * a - 1.0) / (d * d) - 1.0);
    let sign = if params.flip_polar { -1.0 } else { 1.0 };
    (ur, -sign * 2.0 * s / (rho * d))
}

/// Radial profile of the background stream function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialProfile {
    pub r_cut: f64,
    pub taper_start: f64,
    pub taper_end: f64,
}

fn bump(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

fn bump_prime(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp() / (x * x)
    }
}

impl RadialProfile {
    /// `(w, w')` for the cutoff `w`: 1 below `taper_start`, 0 above `taper_end`,
    /// smooth in `ln ρ` so that `ρ w'` stays of order one.
    fn cutoff(&self, rho: f64) -> (f64, f64) {
        let width = (self.taper_end / self.taper_start).ln();
        let s = (rho / self.taper_start).ln() / width;
        if s <= 0.0 {
            return (1.0, 0.0);
        }
        if s >= 1.0 {
            return (0.0, 0.0);
        }
        let (f1, f0) = (bump(1.0 - s), bump(s));
        let den = f1 + f0;
        let w = f1 / den;
        let dw = -(bump_prime(1.0 - s) * f0 + f1 * bump_prime(s)) / (den * den);
        (w, dw / (width * rho))
    }

    /// `(P, Q)` with `P = Φ/ρ²` and `Q = Φ'/ρ`.
    pub fn profiles(&self, rho: f64) -> (f64, f64) {
        let rc = self.r_cut;
        if rho < rc {
            let s = rho * rho / (rc * rc);
            ((3.0 - s) / (2.0 * rc), (3.0 - 2.0 * s) / rc)
        } else {
            let (w, dw) = self.cutoff(rho);
            (w / rho, (w + rho * dw) / rho)
        }
    }
}

/// Velocity of the capped and cut-off profile, finite everywhere except
/// exactly at the origin where it is set to zero.
pub fn mollified_velocity(x: [f64; 3], params: &LandauParams, profile: &RadialProfile) -> [f64; 3] {
    let rho = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if rho == 0.0 {
        return [0.0; 3];
    }
    let (p, q) = profile.profiles(rho);
    velocity_from_profiles(x, rho, p, q, params)
}

#[derive(Debug, Clone)]
pub struct MollifiedBackground {
    pub params: LandauParams,
    pub r_cut: f64,
    pub profile: RadialProfile,
    pub field: VectorField3,
    /// `max |ℙU - U| / max |U_exact|` over nodes with `2 r_cut <= ρ <= taper_start`.
    pub projection_correction: f64,
    /// `max |U - U_exact| / max |U_exact|` over the same nodes.
    pub deviation_from_exact: f64,
    pub weak_norm: f64,
}

/// Default cutoff band as fractions of the box length.
pub const TAPER_FRACTIONS: (f64, f64) = (0.2, 0.48);

pub fn landau_background(
    grid: Grid,
    params: &LandauParams,
    r_cut: f64,
) -> Result<MollifiedBackground, LandauError> {
    let l = grid.box_len();
    landau_background_with_taper(
        grid,
        params,
        r_cut,
        (TAPER_FRACTIONS.0 * l, TAPER_FRACTIONS.1 * l),
    )
}

pub fn landau_background_with_taper(
    grid: Grid,
    params: &LandauParams,
    r_cut: f64,
    taper: (f64, f64),
) -> Result<MollifiedBackground, LandauError> {
    let min = 2.0 * grid.spacing();
    if !(r_cut >= min) {
        return Err(LandauError::CutTooSmall { r_cut, min });
    }
    if !(2.0 * r_cut < taper.0 && taper.0 < taper.1 && taper.1 <= 0.5 * grid.box_len()) {
        return Err(LandauError::BadTaper(taper));
    }
    let profile = RadialProfile {
        r_cut,
        taper_start: taper.0,
        taper_end: taper.1,
    };
    let half = 0.5 * grid.spacing();
    let offset = [half; 3];
    let raw = sample_field(grid, offset, |x| mollified_velocity(x, params, &profile))?;
    let ctx = Spectral::new(grid);
    let mut s = ctx.forward(&raw);
    ctx.leray_in_place(&mut s);
    let field = ctx.inverse(&s);

    let mut correction: f64 = 0.0;
    let mut deviation: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let dist = |a: [f64; 3], b: [f64; 3]| {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    };
    for idx in 0..grid.len() {
        let (i, j, k) = grid.unravel(idx);
        let x = grid.node(i, j, k, offset);
        let rho = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if rho < 2.0 * r_cut || rho > taper.0 {
            continue;
        }
        let exact = landau_velocity(x, params)?;
        scale = scale.max(dist(exact, [0.0; 3]));
        correction = correction.max(dist(field.at(idx), raw.at(idx)));
        deviation = deviation.max(dist(field.at(idx), exact));
    }
    if scale > 0.0 {
        correction /= scale;
        deviation /= scale;
    }
    let weak_norm = weak_l3(&field);
    Ok(MollifiedBackground {
        params: *params,
        r_cut,
        profile,
        field,
        projection_correction: correction,
        deviation_from_exact: deviation,
        weak_norm,
    })
}

/// Central-difference divergence of the closed form at `x` with step `h`.
pub fn fd_divergence(x: [f64; 3], h: f64, params: &LandauParams) -> Result<f64, LandauError> {
    let mut div = 0.0;
    for d in 0..3 {
        let mut xp = x;
        let mut xm = x;
        xp[d] += h;
        xm[d] -= h;
        div += (landau_velocity(xp, params)?[d] - landau_velocity(xm, params)?[d]) / (2.0 * h);
    }
    Ok(div)
}

/// Random points, uniform in volume, in the shell `r_in <= |x| <= r_out`.
pub fn annulus_points(r_in: f64, r_out: f64, count: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u: f64 = rng.gen();
            let r = (r_in.powi(3) + u * (r_out.powi(3) - r_in.powi(3))).cbrt();
            let z: f64 = rng.gen_range(-1.0..1.0);
            let phi = rng.gen_range(0.0..2.0 * PI);
            let s = (1.0 - z * z).sqrt();
            [r * s * phi.cos(), r * s * phi.sin(), r * z]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceRow {
    pub h: f64,
    /// `max |div_h u| / max |u|` over the sample points.
    pub relative: f64,
    pub order_estimate: Option<f64>,
}

/// Finite-difference divergence at a sequence of halving steps.
pub fn divergence_refinement(
    params: &LandauParams,
    points: &[[f64; 3]],
    steps: &[f64],
) -> Result<Vec<DivergenceRow>, LandauError> {
    let mut umax: f64 = 0.0;
    for &x in points {
        let u = landau_velocity(x, params)?;
        umax = umax.max(u.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    let mut rows: Vec<DivergenceRow> = Vec::new();
    for &h in steps {
        let mut worst: f64 = 0.0;
        for &x in points {
            worst = worst.max(fd_divergence(x, h, params)?.abs());
        }
        let relative = worst / umax;
        let order_estimate = rows
            .last()
            .map(|prev| (prev.relative / relative).ln() / (prev.h / h).ln());
        rows.push(DivergenceRow {
            h,
            relative,
            order_estimate,
        });
    }
    Ok(rows)
}

/// Nested central-difference operators on the closed form.
struct Stencil<'a> {
    params: &'a LandauParams,
    h: f64,
}

impl Stencil<'_> {
    fn u(&self, x: [f64; 3]) -> [f64; 3] {
        landau_velocity(x, self.params).expect("stencil stays off the origin")
    }

    fn shift(x: [f64; 3], d: usize, s: f64) -> [f64; 3] {
        let mut y = x;
        y[d] += s;
        y
    }

    /// `(-ΔU + (U·∇)U, ΔU)`.
    fn residual_and_laplacian(&self, x: [f64; 3]) -> ([f64; 3], [f64; 3]) {
        let h = self.h;
        let u0 = self.u(x);
        let mut lap = [0.0; 3];
        let mut adv = [0.0; 3];
        for d in 0..3 {
            let up = self.u(Self::shift(x, d, h));
            let um = self.u(Self::shift(x, d, -h));
            for c in 0..3 {
                lap[c] += (up[c] - 2.0 * u0[c] + um[c]) / (h * h);
                adv[c] += u0[d] * (up[c] - um[c]) / (2.0 * h);
            }
        }
        ([0, 1, 2].map(|c| -lap[c] + adv[c]), lap)
    }

    /// Central-difference curls of the residual and of the Laplacian.
    fn curls(&self, x: [f64; 3]) -> ([f64; 3], [f64; 3]) {
        let h = self.h;
        let mut grad_r = [[0.0; 3]; 3];
        let mut grad_l = [[0.0; 3]; 3];
        for d in 0..3 {
            let (rp, lp) = self.residual_and_laplacian(Self::shift(x, d, h));
            let (rm, lm) = self.residual_and_laplacian(Self::shift(x, d, -h));
            for c in 0..3 {
                grad_r[c][d] = (rp[c] - rm[c]) / (2.0 * h);
                grad_l[c][d] = (lp[c] - lm[c]) / (2.0 * h);
            }
        }
        let curl = |g: [[f64; 3]; 3]| [g[2][1] - g[1][2], g[0][2] - g[2][0], g[1][0] - g[0][1]];
        (curl(grad_r), curl(grad_l))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualRow {
    pub a: f64,
    pub n: usize,
    pub r_in: f64,
    pub r_out: f64,
    /// `‖curl R‖ / ‖curl ΔU‖` over lattice points of the annulus.
    pub residual: f64,
    pub order_estimate: Option<f64>,
    #[serde(skip)]
    pub absolute: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTable {
    pub rows: Vec<ResidualRow>,
}

impl ResidualTable {
    pub fn final_order(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.order_estimate)
    }

    pub fn min_order(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.order_estimate)
            .reduce(f64::min)
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Stationary residual of the closed form on the shell `r_in <= |x| <= r_out`.
///
/// On each level the lattice of spacing `L/n` is used both as sample set
/// and as finite-difference step. The residual `R = -ΔU + (U·∇)U` equals a
/// pressure gradient for an exact solution, and on the shell the curl is
/// the local operator that annihilates gradients, so `curl R` is measured.
pub fn residual_report(
    params: &LandauParams,
    annulus: (f64, f64),
    levels: &[usize],
    box_len: f64,
) -> Result<ResidualTable, LandauError> {
    let (r_in, r_out) = annulus;
    let half = 0.5 * box_len;
    if !(r_in > 0.0 && r_in < r_out && r_out < half) {
        return Err(LandauError::AnnulusOutsideBox { r_in, r_out, half });
    }
    if levels.is_empty() {
        return Err(LandauError::NoLevels);
    }
    let mut rows: Vec<ResidualRow> = Vec::new();
    for &n in levels {
        let grid = Grid::new(n, box_len)?;
        let h = grid.spacing();
        if 3.0 * h >= r_in {
            return Err(LandauError::AnnulusOutsideBox { r_in, r_out, half });
        }
        let st = Stencil { params, h };
        let mut num = 0.0;
        let mut den = 0.0;
        for idx in 0..grid.len() {
            let (i, j, k) = grid.unravel(idx);
            let x = grid.node(i, j, k, [0.0; 3]);
            let rho = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            if rho < r_in || rho > r_out {
                continue;
            }
            let (cr, cl) = st.curls(x);
            num += cr.iter().map(|v| v * v).sum::<f64>();
            den += cl.iter().map(|v| v * v).sum::<f64>();
        }
        let h3 = grid.cell_measure();
        let absolute = (num * h3).sqrt();
        let residual = (num / den).sqrt();
        let order_estimate = rows
            .last()
            .map(|p| (p.residual / residual).ln() / (n as f64 / p.n as f64).ln());
        rows.push(ResidualRow {
            a: params.a,
            n,
            r_in,
            r_out,
            residual,
            order_estimate,
            absolute,
        });
    }
    Ok(ResidualTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Spectral;

    fn norm(v: [f64; 3]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn parameter_validation() {
        assert!(LandauParams::vertical(1.0).is_err());
        assert!(LandauParams::vertical(f64::NAN).is_err());
        assert!(LandauParams::new(2.0, [0.0, 0.0, 2.0]).is_err());
        assert!(LandauParams::new(2.0, [0.6, 0.8, 0.0]).is_ok());
    }

    #[test]
    fn on_axis_value() {
        let p = LandauParams::vertical(2.0).unwrap();
        let u = landau_velocity([0.0, 0.0, 1.0], &p).unwrap();
        assert!(norm([u[0], u[1], u[2] - 4.0]) < 1e-14);
        assert!(matches!(landau_velocity([0.0; 3], &p), Err(LandauError::Origin)));
    }

    #[test]
    fn cartesian_matches_spherical() {
        let p = LandauParams::vertical(3.0).unwrap();
        for &(rho, theta, phi) in &[(1.0, 0.3, 0.2), (2.5, 1.7, -1.0), (0.4, 2.9, 3.0)] {
            let (st, ct) = (f64::sin(theta), f64::cos(theta));
            let x = [rho * st * f64::cos(phi), rho * st * f64::sin(phi), rho * ct];
            let u = landau_velocity(x, &p).unwrap();
            let er = [st * f64::cos(phi), st * f64::sin(phi), ct];
            let et = [ct * f64::cos(phi), ct * f64::sin(phi), -st];
            let (ur, ut) = landau_spherical(rho, theta, &p);
            let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            assert!((dot(u, er) - ur).abs() < 1e-13);
            assert!((dot(u, et) - ut).abs() < 1e-13);
        }
    }

    #[test]
    fn homogeneity() {
        let p = LandauParams::new(2.5, [0.0, 0.6, 0.8]).unwrap();
        for x in annulus_points(0.2, 5.0, 1000, 3) {
            let u = landau_velocity(x, &p).unwrap();
            for lam in [2.0, 0.5, 10.0] {
                let v = landau_velocity(x.map(|c| lam * c), &p).unwrap();
                let err = norm([0, 1, 2].map(|i| v[i] - u[i] / lam));
                assert!(err <= 1e-12 * norm(u) / lam);
            }
        }
    }

    #[test]
    fn magnitude_decreases_in_a() {
        let x = [0.3, -0.2, 0.7];
        let mags: Vec<f64> = [2.0, 4.0, 8.0, 16.0, 32.0]
            .iter()
            .map(|&a| norm(landau_velocity(x, &LandauParams::vertical(a).unwrap()).unwrap()))
            .collect();
        assert!(mags.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn divergence_converges_at_second_order() {
        let p = LandauParams::vertical(2.0).unwrap();
        let pts = annulus_points(1.0, 3.0, 1000, 11);
        let rows = divergence_refinement(&p, &pts, &[0.04, 0.02, 0.01]).unwrap();
        for r in &rows[1..] {
            assert!(r.order_estimate.unwrap() > 1.9, "{rows:?}");
        }
        // small step: divergence at rounding level relative to |u|/h
        let rows = divergence_refinement(&p, &pts, &[1e-4]).unwrap();
        assert!(rows[0].relative <= 1e-8 / 1e-4);
    }

    #[test]
    fn mollified_profile_conditions() {
        let prof = RadialProfile {
            r_cut: 0.5,
            taper_start: 3.0,
            taper_end: 4.0,
        };
        // Φ = ρ² P continuous with matching slope at r_cut
        let phi = |r: f64| r * r * prof.profiles(r).0;
        let eps = 1e-7;
        for r in [0.5 - 1e-12, 0.5 + 1e-12] {
            assert!((phi(r) - 0.5).abs() < 1e-9);
        }
        let dphi_in = (phi(0.5 - 1e-9) - phi(0.5 - 1e-9 - eps)) / eps;
        let dphi_out = (phi(0.5 + 1e-9 + eps) - phi(0.5 + 1e-9)) / eps;
        assert!((dphi_in - dphi_out).abs() < 1e-5);
        // Q = Φ'/ρ agrees with a difference quotient inside the taper
        for r in [0.2, 1.0, 3.2, 3.5, 3.9] {
            let fd = (phi(r + eps) - phi(r - eps)) / (2.0 * eps);
            assert!((prof.profiles(r).1 - fd / r).abs() < 1e-6, "r = {r}");
        }
        assert_eq!(prof.profiles(4.2), (0.0, 0.0));
        assert_eq!(prof.profiles(2.0), (0.5, 0.5));
    }

    #[test]
    fn mollified_velocity_is_divergence_free() {
        let p = LandauParams::vertical(2.0).unwrap();
        let prof = RadialProfile {
            r_cut: 0.5,
            taper_start: 2.0,
            taper_end: 3.0,
        };
        let h = 1e-4;
        for x in annulus_points(0.05, 2.95, 400, 5) {
            let mut div = 0.0;
            for d in 0..3 {
                let (mut xp, mut xm) = (x, x);
                xp[d] += h;
                xm[d] -= h;
                div += (mollified_velocity(xp, &p, &prof)[d] - mollified_velocity(xm, &p, &prof)[d]) / (2.0 * h);
            }
            let scale = norm(mollified_velocity(x, &p, &prof)).max(1e-3);
            assert!(div.abs() < 1e-5 * scale / h.sqrt() + 1e-6, "x = {x:?}: {div}");
        }
    }

    #[test]
    fn background_example_and_errors() {
        let g = Grid::new(64, 16.0).unwrap();
        let p8 = LandauParams::vertical(8.0).unwrap();
        let b8 = landau_background(g, &p8, 0.5).unwrap();
        assert!(b8.weak_norm.is_finite() && b8.weak_norm > 0.0);
        let b16 = landau_background(g, &LandauParams::vertical(16.0).unwrap(), 0.5).unwrap();
        assert!(b16.weak_norm < b8.weak_norm);
        // two cells of core are under-resolved; the correction is reported
        assert!(b8.projection_correction < 2e-2, "{}", b8.projection_correction);
        let ctx = Spectral::new(g);
        let s = ctx.forward(&b8.field);
        let scale = s.l2_coefficients();
        assert!(ctx.divergence(&s).iter().all(|d| d.norm() <= 1e-12 * scale));
        assert!(matches!(
            landau_background(g, &p8, 0.125),
            Err(LandauError::CutTooSmall { .. })
        ));
    }

    #[test]
    fn background_matches_formula_when_core_is_resolved() {
        let g = Grid::new(128, 16.0).unwrap();
        let b = landau_background(g, &LandauParams::vertical(8.0).unwrap(), 1.0).unwrap();
        assert!(b.projection_correction <= 1e-3, "{}", b.projection_correction);
        assert!(b.deviation_from_exact <= 1e-3, "{}", b.deviation_from_exact);
    }

    #[test]
    fn residual_order_and_fault() {
        let p = LandauParams::vertical(2.0).unwrap();
        let t = residual_report(&p, (1.0, 3.0), &[32, 64], 8.0).unwrap();
        assert!(t.rows[1].residual < t.rows[0].residual);
        assert!(t.final_order().unwrap() >= 1.8, "{t:?}");
        let bad = residual_report(&p.with_flipped_polar(), (1.0, 3.0), &[32, 64], 8.0).unwrap();
        assert!(bad.final_order().unwrap().abs() < 0.5, "{bad:?}");
        assert!(bad.rows[1].residual > 0.1);
        let weak = residual_report(&LandauParams::vertical(16.0).unwrap(), (1.0, 3.0), &[32], 8.0).unwrap();
        assert!(weak.rows[0].absolute < t.rows[0].absolute);
        assert!(residual_report(&p, (1.0, 4.5), &[32], 8.0).is_err());
        assert!(residual_report(&p, (2.0, 1.0), &[32], 8.0).is_err());
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("a,n,r_in,r_out,residual,order_estimate\n"));
    }
}
