//! Solutions of the perturbed system
//! `∂ₜu - Δu + u·∇u + u·∇U + U·∇u + ∇p = 0, ∇·u = 0`
//! in mild form, by Duhamel–Picard iteration and by an exponential
//! integrator, plus the norm functionals evaluated along trajectories.
//!
//! Both routes work on the 2/3-dealiased Fourier band. The nonlinear term is
//! `N(u) = -ℙ∇·(u⊗u + u⊗U + U⊗u)`, formed from the symmetric tensor
//! `(u+U)⊗(u+U) - U⊗U`.

use std::io;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixedpoint::{PicardTrace, TraceRow};
use crate::grid::{Grid, GridError, VectorField3};
use crate::lorentz::{
    level_split, weak_l3, DistributionSummary, LorentzError, LorentzIndex,
};
use crate::spectral::{Spectral, SpectralError, SpectralVectorField3};

/// Default sampled exponents for the Kato norms.
pub const DEFAULT_P_LIST: [f64; 5] = [4.0, 6.0, 8.0, 10.0, 16.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("bad solver configuration: {0}")]
    BadConfig(String),
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("time grids do not match")]
    TimeGridMismatch,
    #[error("non-finite state at step {step}; last good time {last_good_time}")]
    NonFinite { step: usize, last_good_time: f64 },
    #[error("Picard iteration not converged after {iterations} iterations (last difference {last_diff})")]
    NotConverged {
        iterations: usize,
        last_diff: f64,
        trace: Box<PicardTrace>,
    },
    #[error("Kato exponent {0} outside (3, inf)")]
    BadExponent(f64),
    #[error("trajectory lacks {0}")]
    MissingData(String),
    #[error("time grid must be positive and strictly decreasing")]
    BadTimeGrid,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Lorentz(#[from] LorentzError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Etd1,
    Etd2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub picard_iters: usize,
    /// Relative X-norm tolerance on successive Picard iterates.
    pub picard_tol: f64,
    /// Threshold parameter of the level split `U = U_low + U_high` at `δ/√t`.
    pub delta_split: f64,
    /// Norms are recorded every `snapshot_stride` steps and at the end.
    pub snapshot_stride: usize,
    pub store_snapshots: bool,
    /// Second Lorentz index of the `L^{3,q}` series; `None` is `∞`.
    pub q: Option<f64>,
    pub p_list: Vec<f64>,
    /// `(ε₁, ε₂)`: bounds on `‖U‖_{3,∞}` and `‖u0‖_{3,q}` for Picard mode.
    pub thresholds: Option<(f64, f64)>,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            scheme: Scheme::Etd2,
            picard_iters: 60,
            picard_tol: 1e-10,
            delta_split: 1.0,
            snapshot_stride: 1,
            store_snapshots: true,
            q: Some(3.0),
            p_list: DEFAULT_P_LIST.to_vec(),
            thresholds: None,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::BadConfig(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be at least dt = {}", self.t_end, self.dt));
        }
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride must be at least 1".into());
        }
        if !(self.delta_split > 0.0) {
            return bad(format!("delta_split must be positive, got {}", self.delta_split));
        }
        if let Some(q) = self.q {
            if !(q >= 1.0 && q.is_finite()) {
                return bad(format!("q must be in [1, inf), got {q}"));
            }
        }
        for &p in &self.p_list {
            if !(p > 3.0 && p.is_finite()) {
                return Err(SolverError::BadExponent(p));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }

    fn l3q(&self) -> LorentzIndex {
        LorentzIndex::from_option(3.0, self.q).expect("validated index")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormRow {
    pub t: f64,
    pub l2: f64,
    pub l3: f64,
    pub l3q: f64,
    pub l3winf: f64,
    pub h1dot: f64,
    /// `(1/p) t^{1/2-3/(2p)} ‖u‖_p` for each configured `p`.
    pub kato: Vec<f64>,
}

/// Per-step quantities of the energy balance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: f64,
    /// `½‖u‖²`.
    pub energy: f64,
    /// `‖∇u‖²`.
    pub dissipation: f64,
    /// `∫ u·(u·∇U)`.
    pub transfer: f64,
}

#[derive(Debug, Clone)]
pub struct SolutionTrajectory {
    pub grid: Grid,
    pub times: Vec<f64>,
    /// Empty unless snapshots were requested.
    pub snapshots: Vec<VectorField3>,
    pub series: Vec<NormRow>,
    pub steps: Vec<StepRecord>,
    pub q: Option<f64>,
    pub p_list: Vec<f64>,
    /// Largest `|κ·û|` per mode seen, on the Fourier-series scale.
    pub max_divergence: f64,
    /// `dt · max|u + U| / h` over the run.
    pub advective_cfl: f64,
}

impl SolutionTrajectory {
    /// Builds a trajectory from given samples, computing the norm series.
    pub fn from_snapshots(
        times: Vec<f64>,
        snapshots: Vec<VectorField3>,
        q: Option<f64>,
        p_list: &[f64],
    ) -> Result<Self, SolverError> {
        if times.len() != snapshots.len() || times.is_empty() {
            return Err(SolverError::TimeGridMismatch);
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SolverError::TimeGridMismatch);
        }
        let grid = *snapshots[0].grid();
        if snapshots.iter().any(|s| *s.grid() != grid) {
            return Err(GridError::GridMismatch.into());
        }
        let idx = LorentzIndex::from_option(3.0, q)?;
        let ctx = Spectral::new(grid);
        let series = times
            .iter()
            .zip(&snapshots)
            .map(|(&t, u)| norm_row(&ctx, t, u, &ctx.forward(u), idx, p_list))
            .collect();
        Ok(Self {
            grid,
            times,
            snapshots,
            series,
            steps: Vec::new(),
            q,
            p_list: p_list.to_vec(),
            max_divergence: 0.0,
            advective_cfl: 0.0,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.snapshots
            .iter()
            .all(|s| s.components().iter().all(|c| c.iter().all(|v| v.is_finite())))
            && self.series.iter().all(|r| r.l2.is_finite() && r.l3winf.is_finite())
    }

    pub fn final_row(&self) -> &NormRow {
        self.series.last().expect("nonempty series")
    }

    /// `sup_t ‖u(t)‖_{3,q} / ‖u(0)‖_{3,q}`, the empirical constant of the
    /// uniform bound (zero for zero data).
    pub fn uniform_bound_constant(&self) -> f64 {
        let first = self.series[0].l3q;
        if first == 0.0 {
            return 0.0;
        }
        self.series.iter().map(|r| r.l3q).fold(0.0, f64::max) / first
    }

    /// `‖u(t)‖_{3,q}` at every stored snapshot for another `q`.
    pub fn l3q_series(&self, q: Option<f64>) -> Result<Vec<(f64, f64)>, SolverError> {
        if self.snapshots.is_empty() {
            return Err(SolverError::MissingData("snapshots".into()));
        }
        let idx = LorentzIndex::from_option(3.0, q)?;
        Ok(self
            .times
            .iter()
            .zip(&self.snapshots)
            .map(|(&t, s)| (t, DistributionSummary::of(s).quasinorm(idx)))
            .collect())
    }

    /// Columns `t, L2, L3, L3q, L3winf, H1dot, K<p>...`.
    pub fn write_norm_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["t", "L2", "L3", "L3q", "L3winf", "H1dot"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(self.p_list.iter().map(|p| format!("K{p}")));
        out.write_record(&header)?;
        for r in &self.series {
            let mut rec = vec![
                r.t.to_string(),
                r.l2.to_string(),
                r.l3.to_string(),
                r.l3q.to_string(),
                r.l3winf.to_string(),
                r.h1dot.to_string(),
            ];
            rec.extend(r.kato.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn kato_weight(t: f64, p: f64) -> f64 {
    t.powf(0.5 - 1.5 / p) / p
}

fn norm_row(
    ctx: &Spectral,
    t: f64,
    u: &VectorField3,
    uh: &SpectralVectorField3,
    idx: LorentzIndex,
    p_list: &[f64],
) -> NormRow {
    let mags = u.magnitudes();
    let h3 = u.grid().cell_measure();
    let lp = |p: f64| -> f64 {
        if p == 2.0 {
            (mags.iter().map(|v| v * v).sum::<f64>() * h3).sqrt()
        } else {
            (mags.iter().map(|v| v.powf(p)).sum::<f64>() * h3).powf(1.0 / p)
        }
    };
    let (l2, l3) = (lp(2.0), lp(3.0));
    let kato = p_list.iter().map(|&p| kato_weight(t, p) * lp(p)).collect();
    let summary = DistributionSummary::from_magnitudes(mags.clone(), h3);
    NormRow {
        t,
        l2,
        l3,
        l3q: summary.quasinorm(idx),
        l3winf: summary.quasinorm(LorentzIndex::weak(3.0).unwrap()),
        h1dot: ctx.dissipation(uh).sqrt(),
        kato,
    }
}

/// Shared spectral machinery of both solution routes.
struct Engine {
    ctx: Spectral,
    k2: Vec<f64>,
    background: Option<(VectorField3, [Vec<f64>; 6])>,
}

const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

impl Engine {
    fn new(grid: Grid, background: Option<&VectorField3>) -> Result<Self, SolverError> {
        let ctx = Spectral::new(grid);
        let n = grid.n();
        let wn = ctx.wavenumbers();
        let mut k2 = vec![0.0; grid.len()];
        k2.par_chunks_mut(n * n).enumerate().for_each(|(i, slab)| {
            for j in 0..n {
                for k in 0..n {
                    slab[j * n + k] = wn.k_squared(i, j, k);
                }
            }
        });
        let background = match background {
            Some(u) => {
                if *u.grid() != grid {
                    return Err(GridError::GridMismatch.into());
                }
                let mut s = ctx.forward(u);
                ctx.dealias_in_place(&mut s);
                ctx.leray_in_place(&mut s);
                let field = ctx.inverse(&s);
                let uu = PAIRS.map(|(a, b)| {
                    let (x, y) = (field.component(a), field.component(b));
                    x.iter().zip(y).map(|(p, q)| p * q).collect()
                });
                Some((field, uu))
            }
            None => None,
        };
        Ok(Self { ctx, k2, background })
    }

    /// Projects onto the dealiased divergence-free band.
    fn admissible(&self, u: &VectorField3) -> SpectralVectorField3 {
        let mut s = self.ctx.forward(u);
        self.ctx.dealias_in_place(&mut s);
        self.ctx.leray_in_place(&mut s);
        s
    }

    /// `N(u)` from the physical field; also returns `max |u + U|`.
    fn nonlinear(&self, u: &VectorField3) -> (SpectralVectorField3, f64) {
        let len = u.grid().len();
        let w: [Vec<f64>; 3] = match &self.background {
            Some((bg, _)) => [0, 1, 2].map(|c| {
                u.component(c)
                    .iter()
                    .zip(bg.component(c))
                    .map(|(a, b)| a + b)
                    .collect()
            }),
            None => u.components().clone(),
        };
        let wmax = (0..len)
            .into_par_iter()
            .map(|i| (w[0][i] * w[0][i] + w[1][i] * w[1][i] + w[2][i] * w[2][i]).sqrt())
            .reduce(|| 0.0, f64::max);
        let t: [Vec<f64>; 6] = [0, 1, 2, 3, 4, 5].map(|e| {
            let (a, b) = PAIRS[e];
            let mut v: Vec<f64> = w[a].iter().zip(&w[b]).map(|(x, y)| x * y).collect();
            if let Some((_, uu)) = &self.background {
                v.iter_mut().zip(&uu[e]).for_each(|(x, y)| *x -= y);
            }
            v
        });
        let mut nh = self.ctx.div_symmetric(&t);
        self.ctx.leray_in_place(&mut nh);
        nh.scale(-1.0);
        (nh, wmax)
    }

    /// Per-mode `e^{-|k|²τ}` and `∫₀^τ e^{-|k|²s} ds`.
    fn etd1_weights(&self, tau: f64) -> (Vec<f64>, Vec<f64>) {
        let e = self.k2.par_iter().map(|&k2| (-k2 * tau).exp()).collect();
        let phi = self.k2.par_iter().map(|&k2| tau * phi1(k2 * tau)).collect();
        (e, phi)
    }

    fn etd2_weight(&self, tau: f64) -> Vec<f64> {
        self.k2.par_iter().map(|&k2| tau * phi2(k2 * tau)).collect()
    }

    fn max_divergence(&self, uh: &SpectralVectorField3) -> f64 {
        let n3 = self.ctx.grid().len() as f64;
        self.ctx
            .divergence(uh)
            .par_iter()
            .map(|c| c.norm() / n3)
            .reduce(|| 0.0, f64::max)
    }
}

/// `(1 - e^{-z})/z`.
fn phi1(z: f64) -> f64 {
    if z < 1e-8 {
        1.0 - z / 2.0
    } else {
        -(-z).exp_m1() / z
    }
}

/// `(e^{-z} - 1 + z)/z²`.
fn phi2(z: f64) -> f64 {
    if z < 1e-3 {
        0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0
    } else {
        ((-z).exp_m1() + z) / (z * z)
    }
}

/// `out = e ⊙ a + φ ⊙ b`, mode by mode.
fn combine(out: &mut SpectralVectorField3, e: &[f64], phi: &[f64], b: &SpectralVectorField3) {
    let bc = b.coefficients();
    for (c, dst) in out.coefficients_mut().iter_mut().enumerate() {
        dst.par_iter_mut()
            .zip(&bc[c])
            .zip(e.par_iter().zip(phi))
            .for_each(|((x, y), (ev, pv))| *x = *x * *ev + *y * *pv);
    }
}

fn add_weighted(out: &mut SpectralVectorField3, w: &[f64], b: &SpectralVectorField3, sign: f64) {
    let bc = b.coefficients();
    for (c, dst) in out.coefficients_mut().iter_mut().enumerate() {
        dst.par_iter_mut()
            .zip(&bc[c])
            .zip(w)
            .for_each(|((x, y), wv)| *x += *y * (*wv * sign));
    }
}

/// `e^{tΔ}u0`; `t = 0` returns `u0` unchanged.
pub fn caloric(u0: &VectorField3, t: f64) -> Result<VectorField3, SolverError> {
    if !(t >= 0.0) {
        return Err(SolverError::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(u0.clone());
    }
    let ctx = Spectral::new(*u0.grid());
    let mut s = ctx.forward(u0);
    ctx.heat_in_place(&mut s, t);
    Ok(ctx.inverse(&s))
}

/// `B(u,v)(t) = -∫₀ᵗ e^{(t-s)Δ} ℙ∇·(u⊗v)(s) ds`.
///
/// Each sample interval is cut into `substeps` pieces. On a piece `[a,b]`
/// the integrand is frozen at `a` (fields linearly interpolated in time) and
/// the heat factor is integrated exactly, weight `(1 - e^{-|k|²(b-a)})/|k|²`.
pub fn duhamel_b(
    times: &[f64],
    u: &[VectorField3],
    v: &[VectorField3],
    t: f64,
    substeps: usize,
) -> Result<VectorField3, SolverError> {
    if times.is_empty() || times.len() != u.len() || times.len() != v.len() {
        return Err(SolverError::TimeGridMismatch);
    }
    if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SolverError::TimeGridMismatch);
    }
    if !(t >= 0.0 && t <= *times.last().unwrap() * (1.0 + 1e-12)) {
        return Err(SolverError::TimeGridMismatch);
    }
    let grid = *u[0].grid();
    if u.iter().chain(v).any(|f| *f.grid() != grid) {
        return Err(GridError::GridMismatch.into());
    }
    if substeps == 0 {
        return Err(SolverError::BadConfig("substeps must be at least 1".into()));
    }
    let engine = Engine::new(grid, None)?;
    let ctx = &engine.ctx;
    let lerp = |f: &[VectorField3], j: usize, theta: f64| -> VectorField3 {
        if theta == 0.0 {
            f[j].clone()
        } else {
            f[j].scaled(1.0 - theta).axpy(theta, &f[j + 1]).expect("same grid")
        }
    };
    let mut acc = SpectralVectorField3::zeros(grid);
    for j in 0..times.len() - 1 {
        let (s0, s1) = (times[j], times[j + 1]);
        if s0 >= t {
            break;
        }
        let span = s1 - s0;
        for m in 0..substeps {
            let a = s0 + span * m as f64 / substeps as f64;
            let b = (s0 + span * (m + 1) as f64 / substeps as f64).min(t);
            if b <= a {
                break;
            }
            let theta = (a - s0) / span;
            let (ua, va) = (lerp(u, j, theta), lerp(v, j, theta));
            let mut f = ctx.div_products(&ctx.dealias_physical(&ua), &ctx.dealias_physical(&va));
            ctx.leray_in_place(&mut f);
            f.scale(-1.0);
            let (e, phi) = engine.etd1_weights(b - a);
            combine(&mut acc, &e, &phi, &f);
        }
    }
    Ok(ctx.inverse(&acc))
}

/// Result of the Duhamel–Picard route.
#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub trajectory: SolutionTrajectory,
    pub trace: PicardTrace,
    /// Set when a configured smallness threshold is exceeded.
    pub smallness_warning: Option<String>,
    pub background_weak_norm: f64,
    pub data_norm: f64,
    /// Level-split checks of `U` at each positive sample time:
    /// `(t, low_bound_holds, superlevel_bound_holds)`.
    pub split_checks: Vec<(f64, bool, bool)>,
}

/// X-norm of a sampled trajectory: `max(K, Y)` with `K` the largest sampled
/// Kato norm and `Y = sup_t ‖·‖_{3,q}`.
fn x_norm(times: &[f64], fields: &[VectorField3], idx: LorentzIndex, p_list: &[f64]) -> f64 {
    times
        .par_iter()
        .zip(fields)
        .map(|(&t, f)| {
            let mags = f.magnitudes();
            let h3 = f.grid().cell_measure();
            let y = DistributionSummary::from_magnitudes(mags.clone(), h3).quasinorm(idx);
            let k = p_list
                .iter()
                .map(|&p| {
                    kato_weight(t, p)
                        * (mags.iter().map(|v| v.powf(p)).sum::<f64>() * h3).powf(1.0 / p)
                })
                .fold(0.0, f64::max);
            y.max(k)
        })
        .reduce(|| 0.0, f64::max)
}

/// Iterates `e ↦ e^{tΔ}u0 + B(e,e) + B(e,U) + B(U,e)` on the sampled
/// trajectory space `t_m = m·dt`, starting from the caloric trajectory.
///
/// With one substep per interval the fixed point coincides with the ETD1
/// trajectory of the same `dt`.
pub fn picard_solve(
    u0: &VectorField3,
    background: Option<&VectorField3>,
    config: &SolverConfig,
) -> Result<PicardOutcome, SolverError> {
    config.validate()?;
    let grid = *u0.grid();
    let engine = Engine::new(grid, background)?;
    let ctx = &engine.ctx;
    let idx = config.l3q();
    let steps = config.steps();
    let dt = config.dt;
    let times: Vec<f64> = (0..=steps).map(|m| m as f64 * dt).collect();

    let data_norm = DistributionSummary::of(u0).quasinorm(idx);
    let background_weak_norm = background.map_or(0.0, weak_l3);
    let smallness_warning = config.thresholds.and_then(|(eps1, eps2)| {
        let mut msgs = Vec::new();
        if background_weak_norm >= eps1 {
            msgs.push(format!("‖U‖_(3,inf) = {background_weak_norm:.6} >= eps1 = {eps1}"));
        }
        if data_norm >= eps2 {
            msgs.push(format!("‖u0‖_(3,q) = {data_norm:.6} >= eps2 = {eps2}"));
        }
        (!msgs.is_empty()).then(|| msgs.join("; "))
    });
    let split_checks = match &engine.background {
        Some((bg, _)) => times[1..]
            .iter()
            .map(|&t| {
                let s = level_split(bg, config.delta_split, t)?;
                Ok((t, s.low_bound_holds(), s.superlevel_bound_holds()))
            })
            .collect::<Result<Vec<_>, LorentzError>>()?,
        None => Vec::new(),
    };

    let (e, phi) = engine.etd1_weights(dt);
    let mut caloric_traj = Vec::with_capacity(steps + 1);
    let mut c = engine.admissible(u0);
    caloric_traj.push(c.clone());
    for _ in 0..steps {
        let mut next = c.clone();
        combine(&mut next, &e, &vec![0.0; e.len()], &c);
        c = next;
        caloric_traj.push(c.clone());
    }

    let to_physical = |traj: &[SpectralVectorField3]| -> Vec<VectorField3> {
        traj.iter().map(|s| ctx.inverse(s)).collect()
    };
    let mut current = caloric_traj.clone();
    let mut phys = to_physical(&current);
    let mut trace = PicardTrace::default();
    trace.rows.push(TraceRow {
        iter: 0,
        norm_e: x_norm(&times, &phys, idx, &config.p_list),
        diff_norm: None,
        ratio: None,
        residual: None,
    });
    let mut prev_diff: Option<f64> = None;
    let mut converged = false;
    for it in 1..=config.picard_iters.max(1) {
        let mut next = Vec::with_capacity(steps + 1);
        let mut acc = SpectralVectorField3::zeros(grid);
        next.push(caloric_traj[0].clone());
        for m in 0..steps {
            let (nh, _) = engine.nonlinear(&phys[m]);
            combine(&mut acc, &e, &phi, &nh);
            let mut val = caloric_traj[m + 1].clone();
            val.axpy(Complex64::new(1.0, 0.0), &acc);
            next.push(val);
        }
        let next_phys = to_physical(&next);
        let diff_fields: Vec<VectorField3> = next_phys
            .iter()
            .zip(&phys)
            .map(|(a, b)| a.axpy(-1.0, b).expect("same grid"))
            .collect();
        let d = x_norm(&times, &diff_fields, idx, &config.p_list);
        let norm_next = x_norm(&times, &next_phys, idx, &config.p_list);
        trace.rows.last_mut().unwrap().residual = Some(d);
        // differences at the round-off floor carry no contraction information
        let floor = 1e-11 * norm_next.max(f64::MIN_POSITIVE);
        let ratio = prev_diff.and_then(|p| (p > floor && d > floor).then(|| d / p));
        trace.rows.push(TraceRow {
            iter: it,
            norm_e: norm_next,
            diff_norm: Some(d),
            ratio,
            residual: None,
        });
        if !d.is_finite() {
            return Err(SolverError::NonFinite {
                step: it,
                last_good_time: 0.0,
            });
        }
        prev_diff = Some(d);
        current = next;
        phys = next_phys;
        if d <= config.picard_tol * norm_next || d == 0.0 {
            converged = true;
            break;
        }
    }
    trace.final_residual = prev_diff.unwrap_or(0.0);
    if !converged {
        return Err(SolverError::NotConverged {
            iterations: trace.iterations(),
            last_diff: trace.final_residual,
            trace: Box::new(trace),
        });
    }

    let max_divergence = current
        .iter()
        .map(|s| engine.max_divergence(s))
        .fold(0.0, f64::max);
    let series = times
        .iter()
        .zip(phys.iter().zip(&current))
        .map(|(&t, (u, uh))| norm_row(ctx, t, u, uh, idx, &config.p_list))
        .collect();
    let trajectory = SolutionTrajectory {
        grid,
        times,
        snapshots: phys,
        series,
        steps: Vec::new(),
        q: config.q,
        p_list: config.p_list.clone(),
        max_divergence,
        advective_cfl: 0.0,
    };
    Ok(PicardOutcome {
        trajectory,
        trace,
        smallness_warning,
        background_weak_norm,
        data_norm,
        split_checks,
    })
}

/// Advances in Fourier space with the exact heat factor and an ETD1 or ETD2
/// (Cox–Matthews, ETD1 first step) treatment of `N`.
///
/// `u0` is first restricted to the dealiased divergence-free band.
pub fn time_step_solve(
    u0: &VectorField3,
    background: Option<&VectorField3>,
    config: &SolverConfig,
) -> Result<SolutionTrajectory, SolverError> {
    config.validate()?;
    let grid = *u0.grid();
    let engine = Engine::new(grid, background)?;
    let ctx = &engine.ctx;
    let idx = config.l3q();
    let steps = config.steps();
    let dt = config.dt;
    let (e, phi) = engine.etd1_weights(dt);
    let phi2w = match config.scheme {
        Scheme::Etd2 => Some(engine.etd2_weight(dt)),
        Scheme::Etd1 => None,
    };

    let mut uh = engine.admissible(u0);
    let mut prev_n: Option<SpectralVectorField3> = None;
    let mut traj = SolutionTrajectory {
        grid,
        times: Vec::new(),
        snapshots: Vec::new(),
        series: Vec::new(),
        steps: Vec::with_capacity(steps + 1),
        q: config.q,
        p_list: config.p_list.clone(),
        max_divergence: 0.0,
        advective_cfl: 0.0,
    };
    let h = grid.spacing();
    let mut last_good = 0.0;
    for step in 0..=steps {
        let t = step as f64 * dt;
        let u = ctx.inverse(&uh);
        if u.components().iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(SolverError::NonFinite {
                step,
                last_good_time: last_good,
            });
        }
        last_good = t;
        let (nh, wmax) = engine.nonlinear(&u);
        traj.advective_cfl = traj.advective_cfl.max(dt * wmax / h);
        traj.max_divergence = traj.max_divergence.max(engine.max_divergence(&uh));
        traj.steps.push(StepRecord {
            t,
            energy: 0.5 * ctx.inner(&uh, &uh),
            dissipation: ctx.dissipation(&uh),
            transfer: -ctx.inner(&uh, &nh),
        });
        if step % config.snapshot_stride == 0 || step == steps {
            traj.times.push(t);
            traj.series.push(norm_row(ctx, t, &u, &uh, idx, &config.p_list));
            if config.store_snapshots {
                traj.snapshots.push(u);
            }
        }
        if step == steps {
            break;
        }
        let mut next = uh.clone();
        combine(&mut next, &e, &phi, &nh);
        if let (Some(w2), Some(pn)) = (&phi2w, &prev_n) {
            add_weighted(&mut next, w2, &nh, 1.0);
            add_weighted(&mut next, w2, pn, -1.0);
        }
        uh = next;
        prev_n = Some(nh);
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KatoNorms {
    pub p_list: Vec<f64>,
    pub per_p: Vec<f64>,
    pub k: f64,
    pub y: f64,
    pub x: f64,
}

/// `K_p = sup_t (1/p) t^{1/2-3/(2p)} ‖u‖_p`, `Y = sup_t ‖u‖_{3,q}`, `X = max(K, Y)`.
///
/// Uses stored snapshots when present, otherwise the recorded series, which
/// must then carry the requested `p` and `q`.
pub fn kato_norms(
    traj: &SolutionTrajectory,
    p_list: &[f64],
    q: Option<f64>,
) -> Result<KatoNorms, SolverError> {
    for &p in p_list {
        if !(p > 3.0 && p.is_finite()) {
            return Err(SolverError::BadExponent(p));
        }
    }
    let idx = LorentzIndex::from_option(3.0, q)?;
    let (per_p, y) = if !traj.snapshots.is_empty() {
        let per_p = p_list
            .iter()
            .map(|&p| {
                traj.times
                    .iter()
                    .zip(&traj.snapshots)
                    .map(|(&t, s)| kato_weight(t, p) * s.lp_norm(p))
                    .fold(0.0, f64::max)
            })
            .collect();
        let y = traj
            .snapshots
            .iter()
            .map(|s| DistributionSummary::of(s).quasinorm(idx))
            .fold(0.0, f64::max);
        (per_p, y)
    } else {
        if q != traj.q {
            return Err(SolverError::MissingData(format!("an L^(3,{q:?}) series")));
        }
        let per_p = p_list
            .iter()
            .map(|&p| {
                let col = traj
                    .p_list
                    .iter()
                    .position(|&x| x == p)
                    .ok_or_else(|| SolverError::MissingData(format!("a K_{p} series")))?;
                Ok(traj.series.iter().map(|r| r.kato[col]).fold(0.0, f64::max))
            })
            .collect::<Result<Vec<f64>, SolverError>>()?;
        let y = traj.series.iter().map(|r| r.l3q).fold(0.0, f64::max);
        (per_p, y)
    };
    let k = per_p.iter().copied().fold(0.0, f64::max);
    Ok(KatoNorms {
        p_list: p_list.to_vec(),
        per_p,
        k,
        y,
        x: k.max(y),
    })
}

/// Relative change of `X` when the sampled exponents change from `base` to
/// `alt`.
pub fn p_list_sensitivity(
    traj: &SolutionTrajectory,
    base: &[f64],
    alt: &[f64],
    q: Option<f64>,
) -> Result<f64, SolverError> {
    let a = kato_norms(traj, base, q)?.x;
    let b = kato_norms(traj, alt, q)?.x;
    Ok(if a == 0.0 { 0.0 } else { (b - a).abs() / a })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    /// `max_t |½‖u(t)‖² - ½‖u(0)‖² + ∫₀ᵗ (‖∇u‖² + ∫u·(u·∇U))| / ½‖u(0)‖²`.
    pub balance_residual: f64,
    /// `‖U‖_{3,∞}`.
    pub a: f64,
    /// `max_t |∫u·(u·∇U)| / (‖U‖_{3,∞} ‖∇u‖²)`.
    pub k_hat: f64,
    pub a_k_hat: f64,
    /// `‖u(t)‖² + 2(1 - A·K̂)∫ₛᵗ‖∇u‖² ≤ ‖u(s)‖²(1 + 1e-6)` at every pair.
    pub inequality_holds: bool,
    /// Smallest `‖u(s)‖²(1 + 1e-6) - lhs` over pairs, relative to `‖u(0)‖²`.
    pub worst_slack: f64,
    pub pairs_checked: usize,
}

/// Energy balance, trilinear ratio and strong energy inequality from the
/// per-step records. Time integrals use Simpson's rule on step pairs, so the
/// checks run on even step indices.
pub fn energy_monitor(
    traj: &SolutionTrajectory,
    background: Option<&VectorField3>,
) -> Result<EnergyReport, SolverError> {
    let rec = &traj.steps;
    if rec.is_empty() {
        return Err(SolverError::MissingData("per-step energy records".into()));
    }
    let a = background.map_or(0.0, weak_l3);
    let e0 = rec[0].energy;
    // cumulative Simpson integrals at even indices
    let mut t_even = vec![0usize];
    let mut int_total = vec![0.0];
    let mut int_diss = vec![0.0];
    let mut i = 0;
    while i + 2 < rec.len() {
        let h = rec[i + 2].t - rec[i].t;
        let simpson = |f: &dyn Fn(&StepRecord) -> f64| {
            h / 6.0 * (f(&rec[i]) + 4.0 * f(&rec[i + 1]) + f(&rec[i + 2]))
        };
        let tot = simpson(&|r| r.dissipation + r.transfer);
        let dis = simpson(&|r| r.dissipation);
        int_total.push(int_total.last().unwrap() + tot);
        int_diss.push(int_diss.last().unwrap() + dis);
        i += 2;
        t_even.push(i);
    }
    let mut balance: f64 = 0.0;
    if e0 > 0.0 {
        for (m, &s) in t_even.iter().enumerate() {
            balance = balance.max((rec[s].energy - e0 + int_total[m]).abs() / e0);
        }
    }
    let a_k_hat = rec
        .iter()
        .filter(|r| r.dissipation > 0.0)
        .map(|r| r.transfer.abs() / r.dissipation)
        .fold(0.0, f64::max);
    let k_hat = if a > 0.0 { a_k_hat / a } else { 0.0 };
    let mut worst = f64::INFINITY;
    let mut pairs = 0;
    for (ms, &s) in t_even.iter().enumerate() {
        for (mt, &t) in t_even.iter().enumerate().skip(ms + 1) {
            let lhs = 2.0 * rec[t].energy + 2.0 * (1.0 - a_k_hat) * (int_diss[mt] - int_diss[ms]);
            let rhs = 2.0 * rec[s].energy * (1.0 + 1e-6);
            let scale = if e0 > 0.0 { 2.0 * e0 } else { 1.0 };
            worst = worst.min((rhs - lhs) / scale);
            pairs += 1;
        }
    }
    if pairs == 0 {
        worst = 0.0;
    }
    Ok(EnergyReport {
        balance_residual: balance,
        a,
        k_hat,
        a_k_hat,
        inequality_holds: worst >= 0.0,
        worst_slack: worst,
        pairs_checked: pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CaloricTrend {
    /// The last value is at most 5% of the largest.
    Vanishing,
    Plateau,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaloricSeries {
    /// `(t, ‖e^{tΔ}u0 - u0‖_{3,q})` in the order of the input grid.
    pub rows: Vec<(f64, f64)>,
    /// `‖u0‖_{3,q}`.
    pub data_norm: f64,
    pub largest: f64,
    pub floor: f64,
    pub trend: CaloricTrend,
}

impl CaloricSeries {
    /// `floor / ‖u0‖_{3,q}`.
    pub fn floor_fraction(&self) -> f64 {
        if self.data_norm == 0.0 {
            0.0
        } else {
            self.floor / self.data_norm
        }
    }
}

/// `‖e^{tΔ}u0 - u0‖_{3,q}` along a decreasing positive `t_grid`.
pub fn caloric_convergence_report(
    u0: &VectorField3,
    q: Option<f64>,
    t_grid: &[f64],
) -> Result<CaloricSeries, SolverError> {
    if t_grid.is_empty()
        || t_grid.iter().any(|&t| !(t > 0.0 && t.is_finite()))
        || t_grid.windows(2).any(|w| !(w[1] < w[0]))
    {
        return Err(SolverError::BadTimeGrid);
    }
    let idx = LorentzIndex::from_option(3.0, q)?;
    let ctx = Spectral::new(*u0.grid());
    let s0 = ctx.forward(u0);
    let rows: Vec<(f64, f64)> = t_grid
        .iter()
        .map(|&t| {
            let mut s = s0.clone();
            ctx.heat_in_place(&mut s, t);
            let diff = ctx.inverse(&s).axpy(-1.0, u0).expect("same grid");
            (t, DistributionSummary::of(&diff).quasinorm(idx))
        })
        .collect();
    let largest = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let floor = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let last = rows.last().unwrap().1;
    let trend = if last <= 0.05 * largest {
        CaloricTrend::Vanishing
    } else {
        CaloricTrend::Plateau
    };
    Ok(CaloricSeries {
        rows,
        data_norm: DistributionSummary::of(u0).quasinorm(idx),
        largest,
        floor,
        trend,
    })
}
