//! One-time sweep that fixes the default smallness thresholds.
//!
//! Each candidate `(ε₁, ε₂)` is probed with data sitting just inside the
//! gate on a coarse grid: the tapered Landau background rescaled to
//! `‖U‖_{3,∞} = 0.999 ε₁` and a swirl bump rescaled to `‖u0‖_{L³} = 0.999 ε₂`.
//! The Picard iteration of the mild formulation is run on the calibration
//! window and the largest contraction ratio recorded. Both thresholds are
//! halved until that ratio is at most `7/8 + 0.05`.

use lnslab_core::landau::{landau_background_with_taper, LandauParams};
use lnslab_core::lorentz::weak_l3;
use lnslab_core::mild_solver::{picard_solve, Scheme, SolverConfig, SolverError};
use lnslab_core::Grid;
use serde::Serialize;

use crate::{setup, RunError};

pub const RATIO_LIMIT: f64 = 7.0 / 8.0 + 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationStep {
    pub eps1: f64,
    pub eps2: f64,
    pub background_weak_norm: f64,
    pub data_norm: f64,
    /// `None` when the iteration produced fewer than two informative ratios.
    pub max_ratio: Option<f64>,
    pub converged: bool,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub steps: Vec<CalibrationStep>,
    /// The accepted pair, if any candidate passed.
    pub thresholds: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub start: (f64, f64),
    pub max_halvings: usize,
    pub n: usize,
    pub box_len: f64,
    pub landau_a: f64,
    pub dt: f64,
    pub t_end: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            start: (16.0, 64.0),
            max_halvings: 8,
            n: 16,
            box_len: 8.0,
            landau_a: 8.0,
            dt: 0.05,
            t_end: 1.0,
        }
    }
}

pub fn calibrate_thresholds(settings: &SweepSettings) -> Result<Calibration, RunError> {
    let grid = Grid::new(settings.n, settings.box_len)?;
    let bg = landau_background_with_taper(
        grid,
        &LandauParams::vertical(settings.landau_a)?,
        1.0,
        (0.3125 * settings.box_len, 0.5 * settings.box_len),
    )?;
    let bump = setup::bump(grid, 1.0, [1.0, 0.0, 0.5], 1.0)?;
    let (bg_norm, bump_norm) = (bg.weak_norm, bump.lp_norm(3.0));
    let mut cfg = SolverConfig::new(settings.dt, settings.t_end);
    cfg.scheme = Scheme::Etd1;

    let (mut eps1, mut eps2) = settings.start;
    let mut steps = Vec::new();
    for _ in 0..=settings.max_halvings {
        let u = bg.field.scaled(0.999 * eps1 / bg_norm);
        let u0 = bump.scaled(0.999 * eps2 / bump_norm);
        let (max_ratio, converged) = match picard_solve(&u0, Some(&u), &cfg) {
            Ok(o) => (informative_max(&o.trace), true),
            Err(SolverError::NotConverged { trace, .. }) => (informative_max(&trace), false),
            Err(SolverError::NonFinite { .. }) => (None, false),
            Err(e) => return Err(e.into()),
        };
        let accepted = converged && max_ratio.is_some_and(|r| r <= RATIO_LIMIT);
        steps.push(CalibrationStep {
            eps1,
            eps2,
            background_weak_norm: weak_l3(&u),
            data_norm: u0.lp_norm(3.0),
            max_ratio,
            converged,
            accepted,
        });
        if accepted {
            return Ok(Calibration {
                steps,
                thresholds: Some((eps1, eps2)),
            });
        }
        eps1 /= 2.0;
        eps2 /= 2.0;
    }
    Ok(Calibration {
        steps,
        thresholds: None,
    })
}

fn informative_max(trace: &lnslab_core::fixedpoint::PicardTrace) -> Option<f64> {
    trace.rows.iter().filter_map(|r| r.ratio).reduce(f64::max)
}
