//! Picard iteration for `e = e₀ - B(e,e) - B(U,e) - B(e,U)` on an abstract
//! normed space, with the smallness hypotheses checked before iterating.

use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

/// Carrier of the iteration.
pub trait NormedSpace: Clone {
    fn add(&self, other: &Self) -> Self;
    fn scale(&self, s: f64) -> Self;
    fn norm(&self) -> f64;
    /// A random element of the same shape with norm one (zero only if the
    /// space is trivial).
    fn random_unit(&self, rng: &mut ChaCha8Rng) -> Self;

    fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    fn zero_like(&self) -> Self {
        self.scale(0.0)
    }
}

/// `B(x, y)` with a certified bound `‖B(x,y)‖ <= C_B ‖x‖ ‖y‖`.
pub trait Bilinear<E> {
    fn apply(&self, x: &E, y: &E) -> E;
    fn bound(&self) -> f64;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FixedPointError {
    #[error("cb_below_one: C_B = {0} but the argument needs C_B >= 1")]
    CbBelowOne(f64),
    #[error("eps_too_large: eps = {eps} exceeds 1/(4 C_B) = {limit}")]
    EpsTooLarge { eps: f64, limit: f64 },
    #[error("data_exceeds_eps: ‖e0‖ = {norm} exceeds eps = {eps}")]
    DataExceedsEps { norm: f64, eps: f64 },
    #[error("linear_bound_violated: probe {probe} gives ‖B(e,U)‖ + ‖B(U,e)‖ = {lhs} > ‖e‖/8 = {rhs}")]
    LinearBoundViolated { probe: usize, lhs: f64, rhs: f64 },
    #[error("bilinear_bound_violated: probe {probe} gives ‖B(x,y)‖ = {lhs} > C_B ‖x‖ ‖y‖ = {rhs}")]
    BilinearBoundViolated { probe: usize, lhs: f64, rhs: f64 },
    #[error("not converged after {iterations} iterations, residual {residual}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("iterate left the ball: ‖e_{iteration}‖ = {norm} > {radius}")]
    LeftBall {
        iteration: usize,
        norm: f64,
        radius: f64,
    },
    #[error("uniqueness trial {trial} failed: {reason}")]
    TrialFailed { trial: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig {
    pub eps: f64,
    /// `None` selects `1e-12 · max(1, ‖e0‖)`.
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub probes: usize,
    pub seed: u64,
}

impl PicardConfig {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            tol: None,
            max_iter: 200,
            probes: 32,
            seed: 0,
        }
    }

    fn tolerance(&self, e0_norm: f64) -> f64 {
        self.tol.unwrap_or(1e-12 * e0_norm.max(1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub norm_e: f64,
    pub diff_norm: Option<f64>,
    pub ratio: Option<f64>,
    /// `‖Φ(e_n) - e_n‖`, the fixed-point residual of this iterate.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PicardTrace {
    pub rows: Vec<TraceRow>,
    pub final_residual: f64,
}

impl PicardTrace {
    pub fn max_ratio(&self) -> f64 {
        self.rows
            .iter()
            .filter_map(|r| r.ratio)
            .fold(0.0, f64::max)
    }

    pub fn max_norm(&self) -> f64 {
        self.rows.iter().map(|r| r.norm_e).fold(0.0, f64::max)
    }

    pub fn iterations(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    /// Checks `‖e_{n+1} - e_n‖ <= q^n ‖e_1 - e_0‖ (1 + 1e-9)`.
    pub fn geometric_decay(&self, q: f64) -> bool {
        let diffs: Vec<f64> = self.rows.iter().filter_map(|r| r.diff_norm).collect();
        let Some(&first) = diffs.first() else {
            return true;
        };
        diffs
            .iter()
            .enumerate()
            .all(|(n, &d)| d <= q.powi(n as i32) * first * (1.0 + 1e-9))
    }

    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| {
            r.norm_e.is_finite()
                && r.diff_norm.map_or(true, f64::is_finite)
                && r.ratio.map_or(true, f64::is_finite)
                && r.residual.map_or(true, f64::is_finite)
        }) && self.final_residual.is_finite()
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

/// `Φ(e) = e₀ - B(e,e) - B(U,e) - B(e,U)`.
pub fn fixed_point_map<E: NormedSpace, B: Bilinear<E>>(e0: &E, b: &B, u: &E, e: &E) -> E {
    let s = b.apply(e, e).add(&b.apply(u, e)).add(&b.apply(e, u));
    e0.sub(&s)
}

/// Verifies every hypothesis of the iteration, probing the bilinear and
/// linear bounds on `config.probes` random elements.
pub fn check_preconditions<E: NormedSpace, B: Bilinear<E>>(
    e0: &E,
    b: &B,
    u: &E,
    config: &PicardConfig,
) -> Result<(), FixedPointError> {
    let cb = b.bound();
    if !(cb >= 1.0) {
        return Err(FixedPointError::CbBelowOne(cb));
    }
    let limit = 1.0 / (4.0 * cb);
    if !(config.eps <= limit) {
        return Err(FixedPointError::EpsTooLarge {
            eps: config.eps,
            limit,
        });
    }
    let n0 = e0.norm();
    if !(n0 <= config.eps) {
        return Err(FixedPointError::DataExceedsEps {
            norm: n0,
            eps: config.eps,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for probe in 0..config.probes {
        let e = e0.random_unit(&mut rng);
        let lhs = b.apply(&e, u).norm() + b.apply(u, &e).norm();
        let rhs = e.norm() / 8.0;
        if lhs > rhs * (1.0 + 1e-12) {
            return Err(FixedPointError::LinearBoundViolated { probe, lhs, rhs });
        }
        let y = e0.random_unit(&mut rng);
        let lhs = b.apply(&e, &y).norm();
        let rhs = cb * e.norm() * y.norm();
        if lhs > rhs * (1.0 + 1e-12) {
            return Err(FixedPointError::BilinearBoundViolated { probe, lhs, rhs });
        }
    }
    Ok(())
}

/// Iterates `Φ` from `start` until the residual drops below `tol`.
fn iterate<E: NormedSpace, B: Bilinear<E>>(
    e0: &E,
    b: &B,
    u: &E,
    start: E,
    tol: f64,
    max_iter: usize,
) -> Result<(E, PicardTrace), FixedPointError> {
    let mut trace = PicardTrace::default();
    let mut e = start;
    trace.rows.push(TraceRow {
        iter: 0,
        norm_e: e.norm(),
        diff_norm: None,
        ratio: None,
        residual: None,
    });
    let mut prev_diff: Option<f64> = None;
    for n in 1..=max_iter {
        let next = fixed_point_map(e0, b, u, &e);
        let d = next.sub(&e).norm();
        trace.rows.last_mut().unwrap().residual = Some(d);
        let ratio = prev_diff.and_then(|p| (p > 0.0).then(|| d / p));
        e = next;
        trace.rows.push(TraceRow {
            iter: n,
            norm_e: e.norm(),
            diff_norm: Some(d),
            ratio,
            residual: None,
        });
        prev_diff = Some(d);
        if !d.is_finite() {
            break;
        }
        if d <= tol {
            let r = fixed_point_map(e0, b, u, &e).sub(&e).norm();
            trace.rows.last_mut().unwrap().residual = Some(r);
            trace.final_residual = r;
            if r <= tol {
                return Ok((e, trace));
            }
        }
    }
    let r = fixed_point_map(e0, b, u, &e).sub(&e).norm();
    trace.final_residual = r;
    if r <= tol {
        trace.rows.last_mut().unwrap().residual = Some(r);
        return Ok((e, trace));
    }
    Err(FixedPointError::NotConverged {
        iterations: trace.iterations(),
        residual: r,
    })
}

/// Solves `e = e₀ - B(e,e) - B(U,e) - B(e,U)` by Picard iteration from `e₀`.
pub fn solve_picard<E: NormedSpace, B: Bilinear<E>>(
    e0: &E,
    b: &B,
    u: &E,
    config: &PicardConfig,
) -> Result<(E, PicardTrace), FixedPointError> {
    check_preconditions(e0, b, u, config)?;
    let tol = config.tolerance(e0.norm());
    let (e, trace) = iterate(e0, b, u, e0.clone(), tol, config.max_iter)?;
    let radius = 1.5 * config.eps;
    for r in &trace.rows {
        if r.norm_e > radius * (1.0 + 1e-12) {
            return Err(FixedPointError::LeftBall {
                iteration: r.iter,
                norm: r.norm_e,
                radius,
            });
        }
    }
    Ok((e, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UniquenessBound {
    /// `3ε/2`.
    Ball,
    /// `7/(16 C_B)`.
    Contraction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub radius: f64,
    pub active_bound: UniquenessBound,
    /// Norms of the perturbed starting points.
    pub start_norms: Vec<f64>,
    /// Distance of each trial's limit from the reference solution.
    pub distances: Vec<f64>,
    pub max_pairwise: f64,
}

/// Restarts the iteration from `trials` random points inside the uniqueness
/// ball and compares the limits.
pub fn uniqueness_probe<E: NormedSpace, B: Bilinear<E>>(
    e0: &E,
    b: &B,
    u: &E,
    config: &PicardConfig,
    trials: usize,
) -> Result<UniquenessReport, FixedPointError> {
    let (reference, _) = solve_picard(e0, b, u, config)?;
    let ball = 1.5 * config.eps;
    let contraction = 7.0 / (16.0 * b.bound());
    let (radius, active_bound) = if ball <= contraction {
        (ball, UniquenessBound::Ball)
    } else {
        (contraction, UniquenessBound::Contraction)
    };
    let tol = config.tolerance(e0.norm());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut limits = Vec::with_capacity(trials);
    let mut start_norms = Vec::with_capacity(trials);
    for trial in 0..trials {
        let r = radius * rng.gen_range(0.1..1.0);
        let start = e0.random_unit(&mut rng).scale(r);
        start_norms.push(start.norm());
        let (lim, _) = iterate(e0, b, u, start, tol, config.max_iter).map_err(|e| {
            FixedPointError::TrialFailed {
                trial,
                reason: e.to_string(),
            }
        })?;
        limits.push(lim);
    }
    let distances = limits.iter().map(|l| l.sub(&reference).norm()).collect();
    let mut max_pairwise: f64 = 0.0;
    for i in 0..limits.len() {
        for j in i + 1..limits.len() {
            max_pairwise = max_pairwise.max(limits[i].sub(&limits[j]).norm());
        }
    }
    Ok(UniquenessReport {
        radius,
        active_bound,
        start_norms,
        distances,
        max_pairwise,
    })
}

impl NormedSpace for f64 {
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn scale(&self, s: f64) -> Self {
        self * s
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
    fn random_unit(&self, rng: &mut ChaCha8Rng) -> Self {
        if rng.gen::<bool>() {
            1.0
        } else {
            -1.0
        }
    }
}

/// `ℝᵈ` with the Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Euclidean(pub Vec<f64>);

impl NormedSpace for Euclidean {
    fn add(&self, other: &Self) -> Self {
        Euclidean(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
    fn scale(&self, s: f64) -> Self {
        Euclidean(self.0.iter().map(|a| a * s).collect())
    }
    fn norm(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
    fn random_unit(&self, rng: &mut ChaCha8Rng) -> Self {
        loop {
            let v = Euclidean((0..self.0.len()).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let n = v.norm();
            if n > 1e-3 || self.0.is_empty() {
                return if n > 0.0 { v.scale(1.0 / n) } else { v };
            }
        }
    }
}

/// Pointwise product on scalars, `C_B = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScalarProduct;

impl Bilinear<f64> for ScalarProduct {
    fn apply(&self, x: &f64, y: &f64) -> f64 {
        x * y
    }
    fn bound(&self) -> f64 {
        1.0
    }
}

/// `B(x,y)_i = Σ_{jk} T_ijk x_j y_k`, certified by the Frobenius norm.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBilinear {
    dim: usize,
    t: Vec<f64>,
    bound: f64,
}

impl TensorBilinear {
    pub fn new(dim: usize, t: Vec<f64>) -> Self {
        assert_eq!(t.len(), dim * dim * dim, "tensor must have dim³ entries");
        // rounded up past the summation error of len terms, so the certificate
        // is a true upper bound and a unit tensor never reports C_B < 1
        let slack = 1.0 + 2.0 * (t.len() as f64 + 2.0) * f64::EPSILON;
        let bound = t.iter().map(|v| v * v).sum::<f64>().sqrt() * slack;
        Self { dim, t, bound }
    }

    /// Seeded random tensor scaled to Frobenius norm one.
    pub fn random_unit(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t: Vec<f64> = (0..dim * dim * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        Self::new(dim, t.into_iter().map(|v| v / f).collect())
    }
}

impl Bilinear<Euclidean> for TensorBilinear {
    fn apply(&self, x: &Euclidean, y: &Euclidean) -> Euclidean {
        let d = self.dim;
        Euclidean(
            (0..d)
                .map(|i| {
                    let mut s = 0.0;
                    for j in 0..d {
                        for k in 0..d {
                            s += self.t[(i * d + j) * d + k] * x.0[j] * y.0[k];
                        }
                    }
                    s
                })
                .collect(),
        )
    }
    fn bound(&self) -> f64 {
        self.bound
    }
}

/// Bilinear map from a closure with a stated bound.
pub struct FnBilinear<F> {
    pub f: F,
    pub bound: f64,
}

impl<E, F: Fn(&E, &E) -> E> Bilinear<E> for FnBilinear<F> {
    fn apply(&self, x: &E, y: &E) -> E {
        (self.f)(x, y)
    }
    fn bound(&self) -> f64 {
        self.bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar_oracle(e0: f64, u: f64) -> f64 {
        // e = e0 - e² - 2ue  ⇒  e² + (1 + 2u)e - e0 = 0
        let b = 1.0 + 2.0 * u;
        (-b + (b * b + 4.0 * e0).sqrt()) / 2.0
    }

    #[test]
    fn zero_data_is_immediate() {
        let (e, trace) = solve_picard(&0.0, &ScalarProduct, &(1.0 / 16.0), &PicardConfig::new(0.25)).unwrap();
        assert_eq!(e, 0.0);
        assert_eq!(trace.iterations(), 1);
        assert_eq!(trace.final_residual, 0.0);
    }

    #[test]
    fn scalar_quadratic_root() {
        let (e, trace) = solve_picard(&0.2, &ScalarProduct, &(1.0 / 16.0), &PicardConfig::new(0.25)).unwrap();
        let want = (-9.0 / 8.0 + (81.0f64 / 64.0 + 0.8).sqrt()) / 2.0;
        assert!((want - scalar_oracle(0.2, 1.0 / 16.0)).abs() < 1e-15);
        assert!((e - want).abs() <= 1e-12, "{e} vs {want}");
        assert!((e - 0.1561).abs() < 1e-4);
        assert!(trace.max_ratio() <= 7.0 / 8.0 + 1e-9);
        assert!(trace.max_norm() <= 1.5 * 0.25);
        assert!(trace.geometric_decay(7.0 / 8.0));
        assert!(trace.all_finite());
    }

    #[test]
    fn named_precondition_errors() {
        let half = FnBilinear {
            f: |x: &f64, y: &f64| 0.5 * x * y,
            bound: 0.5,
        };
        assert!(matches!(
            solve_picard(&0.1, &half, &0.0, &PicardConfig::new(0.1)),
            Err(FixedPointError::CbBelowOne(_))
        ));
        assert!(matches!(
            solve_picard(&0.1, &ScalarProduct, &0.0, &PicardConfig::new(0.3)),
            Err(FixedPointError::EpsTooLarge { .. })
        ));
        assert!(matches!(
            solve_picard(&0.2, &ScalarProduct, &0.0, &PicardConfig::new(0.1)),
            Err(FixedPointError::DataExceedsEps { .. })
        ));
        assert!(matches!(
            solve_picard(&0.1, &ScalarProduct, &0.1, &PicardConfig::new(0.25)),
            Err(FixedPointError::LinearBoundViolated { .. })
        ));
        let lying = FnBilinear {
            f: |x: &f64, y: &f64| 3.0 * x * y,
            bound: 1.0,
        };
        assert!(matches!(
            solve_picard(&0.1, &lying, &0.0, &PicardConfig::new(0.25)),
            Err(FixedPointError::BilinearBoundViolated { .. })
        ));
        let mut cfg = PicardConfig::new(0.25);
        cfg.max_iter = 3;
        assert!(matches!(
            solve_picard(&0.2, &ScalarProduct, &(1.0 / 16.0), &cfg),
            Err(FixedPointError::NotConverged { iterations: 3, .. })
        ));
    }

    #[test]
    fn scalar_uniqueness() {
        let cfg = PicardConfig::new(0.25);
        let r = uniqueness_probe(&0.2, &ScalarProduct, &(1.0 / 16.0), &cfg, 5).unwrap();
        assert!(r.max_pairwise <= 1e-12);
        assert!(r.distances.iter().all(|&d| d <= 1e-12));
        // 3ε/2 = 0.375 < 7/16
        assert_eq!(r.active_bound, UniquenessBound::Ball);
        let r = uniqueness_probe(&0.0, &ScalarProduct, &0.0, &cfg, 5).unwrap();
        assert!(r.distances.iter().all(|&d| d <= 1e-12));
        assert!(r.start_norms.iter().all(|&n| n > 0.0 && n <= r.radius));
    }

    #[test]
    fn r8_instance() {
        let b = TensorBilinear::random_unit(8, 1);
        assert!(b.bound() >= 1.0 && b.bound() - 1.0 < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let template = Euclidean(vec![0.0; 8]);
        let e0 = template.random_unit(&mut rng).scale(0.19);
        let u = template.random_unit(&mut rng).scale(1.0 / 17.0);
        let cfg = PicardConfig::new(0.2);
        let (e, trace) = solve_picard(&e0, &b, &u, &cfg).unwrap();
        assert!(e.norm() <= 0.3);
        assert!(trace.final_residual <= 1e-12);
        assert!(trace.max_ratio() <= 7.0 / 8.0 + 1e-9);
        let r = uniqueness_probe(&e0, &b, &u, &cfg, 5).unwrap();
        assert!(r.max_pairwise <= 1e-10);
    }

    #[test]
    fn trace_csv_columns() {
        let (_, trace) = solve_picard(&0.2, &ScalarProduct, &(1.0 / 16.0), &PicardConfig::new(0.25)).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,norm_e,diff_norm,ratio,residual\n"));
        assert_eq!(text.lines().count(), trace.rows.len() + 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn tensor_map_is_bilinear_and_bounded(seed in any::<u64>(), s in -3.0f64..3.0) {
            let b = TensorBilinear::random_unit(6, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
            let t = Euclidean(vec![0.0; 6]);
            let (x, y, z) = (t.random_unit(&mut rng), t.random_unit(&mut rng), t.random_unit(&mut rng));
            let lhs = b.apply(&x.add(&z.scale(s)), &y);
            let rhs = b.apply(&x, &y).add(&b.apply(&z, &y).scale(s));
            prop_assert!(lhs.sub(&rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
            let lhs = b.apply(&x, &y.add(&z.scale(s)));
            let rhs = b.apply(&x, &y).add(&b.apply(&x, &z).scale(s));
            prop_assert!(lhs.sub(&rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
            prop_assert!(b.apply(&x, &y).norm() <= b.bound() * x.norm() * y.norm() * (1.0 + 1e-12));
            prop_assert!(x.add(&y).norm() <= x.norm() + y.norm() + 1e-15);
            prop_assert_eq!(x.zero_like().norm(), 0.0);
        }

        #[test]
        fn scalar_runs_match_oracle(e0 in 0.0f64..0.25, u in -0.0625f64..0.0625) {
            let (e, trace) = solve_picard(&e0, &ScalarProduct, &u, &PicardConfig::new(0.25)).unwrap();
            prop_assert!((e - scalar_oracle(e0, u)).abs() <= 1e-12);
            prop_assert!(trace.max_ratio() <= 7.0 / 8.0 + 1e-9);
            prop_assert!(trace.max_norm() <= 0.375);
        }
    }
}
