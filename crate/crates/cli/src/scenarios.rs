//! The stability and counterexample runs. Both go through
//! [`time_step_solve`]; only the data and background differ.

use std::path::Path;

use lnslab_core::dss::{annulus_inequalities, rescaled_norm_series, single_shell_control, AnnulusReport, RescaledSeries};
use lnslab_core::lorentz::{lorentz_quasinorm, weak_l3, LorentzIndex};
use lnslab_core::mild_solver::{
    energy_monitor, kato_norms, time_step_solve, EnergyReport, KatoNorms, SolutionTrajectory, SolverConfig,
};
use lnslab_core::VectorField3;
use serde::Serialize;

use crate::config::{ExperimentConfig, Gate};
use crate::{create, setup, write_json, RunError};

pub fn solver_config(cfg: &ExperimentConfig) -> SolverConfig {
    let mut s = SolverConfig::new(cfg.dt, cfg.t_end);
    s.scheme = cfg.scheme;
    s.q = cfg.q_index();
    s.snapshot_stride = cfg.stride;
    s.store_snapshots = false;
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateCheck {
    pub gate: Gate,
    pub background_bound: f64,
    pub data_bound: f64,
    pub background_ok: bool,
    pub data_ok: bool,
}

impl GateCheck {
    pub fn new(gate: Gate, eps1: f64, eps2: f64, a: f64, data: f64) -> Self {
        match gate {
            Gate::Full => Self {
                gate,
                background_bound: eps1,
                data_bound: eps2,
                background_ok: a < eps1,
                data_ok: data < eps2,
            },
            Gate::Halved => Self {
                gate,
                background_bound: eps1 / 2.0,
                data_bound: eps2 / 2.0,
                background_ok: a <= eps1 / 2.0,
                data_ok: data <= eps2 / 2.0,
            },
        }
    }

    pub fn passes(&self) -> bool {
        self.background_ok && self.data_ok
    }
}

/// `(t, value)` pairs of a tracked norm and whether they never increase by
/// more than `1e-3` relative between samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trend {
    pub series: Vec<(f64, f64)>,
    pub non_increasing: bool,
    pub final_ratio: f64,
}

impl Trend {
    fn of(series: Vec<(f64, f64)>) -> Self {
        let non_increasing = series.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-3));
        let first = series.first().map_or(0.0, |p| p.1);
        let last = series.last().map_or(0.0, |p| p.1);
        let final_ratio = if first > 0.0 { last / first } else { 0.0 };
        Self {
            series,
            non_increasing,
            final_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub n: usize,
    pub box_len: f64,
    pub q: f64,
    /// Measured `A = ‖U‖_{3,∞}`.
    pub background_weak_norm: f64,
    /// Measured `‖u0‖_{3,q}`.
    pub data_norm: f64,
    pub full_gate: GateCheck,
    pub halved_gate: GateCheck,
    pub applied_gate: Gate,
    pub zero_data: bool,
    pub l3: Trend,
    pub l3q: Trend,
    /// `sup_t ‖u‖_{3,q} / ‖u0‖_{3,q}`.
    pub uniform_bound_constant: f64,
    pub decay_target: f64,
    pub decay_pass: bool,
    pub kato: KatoNorms,
    pub energy: EnergyReport,
    pub advective_cfl: f64,
    pub max_divergence: f64,
    pub pass: bool,
}

fn series_of(traj: &SolutionTrajectory, f: impl Fn(&lnslab_core::mild_solver::NormRow) -> f64) -> Vec<(f64, f64)> {
    traj.series.iter().map(|r| (r.t, f(r))).collect()
}

/// Evolves the configured datum around the configured background after
/// checking both smallness gates; the one named in the config is enforced.
pub fn run_stability(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<StabilityReport, RunError> {
    let grid = setup::grid(cfg)?;
    let bg = setup::background(cfg, grid)?;
    let (u0, _) = setup::data(cfg, grid)?;
    let a = bg.as_ref().map_or(0.0, |b| b.weak_norm);
    let data_norm = lorentz_quasinorm(&u0, LorentzIndex::from_option(3.0, cfg.q_index())?);
    let full_gate = GateCheck::new(Gate::Full, cfg.eps1, cfg.eps2, a, data_norm);
    let halved_gate = GateCheck::new(Gate::Halved, cfg.eps1, cfg.eps2, a, data_norm);
    let applied = match cfg.gate {
        Gate::Full => &full_gate,
        Gate::Halved => &halved_gate,
    };
    if !applied.passes() {
        return Err(RunError::Refused(format!(
            "{:?} gate: ‖U‖_(3,inf) = {a:.6} against {:.6}, ‖u0‖_(3,q) = {data_norm:.6} against {:.6}",
            cfg.gate, applied.background_bound, applied.data_bound
        )));
    }
    let scfg = solver_config(cfg);
    let bfield = bg.as_ref().map(|b| &b.field);
    let traj = time_step_solve(&u0, bfield, &scfg)?;
    let l3 = Trend::of(series_of(&traj, |r| r.l3));
    let l3q = Trend::of(series_of(&traj, |r| r.l3q));
    let zero_data = traj.series[0].l3 == 0.0;
    let decay_pass = zero_data || l3.final_ratio <= cfg.decay_target;
    let kato = kato_norms(&traj, &scfg.p_list, scfg.q)?;
    let energy = energy_monitor(&traj, bfield)?;
    let pass = decay_pass && (zero_data || (l3.non_increasing && l3q.non_increasing)) && energy.inequality_holds;
    let report = StabilityReport {
        n: cfg.n,
        box_len: cfg.box_len,
        q: cfg.q,
        background_weak_norm: a,
        data_norm,
        full_gate: full_gate.clone(),
        halved_gate: halved_gate.clone(),
        applied_gate: cfg.gate,
        zero_data,
        uniform_bound_constant: traj.uniform_bound_constant(),
        l3,
        l3q,
        decay_target: cfg.decay_target,
        decay_pass,
        kato,
        energy,
        advective_cfl: traj.advective_cfl,
        max_divergence: traj.max_divergence,
        pass,
    };
    if let Some(dir) = out {
        traj.write_norm_csv(create(dir, "norms.csv")?)?;
        write_json(dir, "stability.json", &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub lambda: f64,
    pub amplitude: f64,
    pub data_weak_norm: f64,
    pub divergence_relative: f64,
    pub background_weak_norm: f64,
    pub inequalities: AnnulusReport,
    /// Set for a zero datum; no non-decay assertion is made then.
    pub degenerate: bool,
    /// `(t, ‖u(t)‖_{3,∞} / ‖u0‖_{3,∞})`.
    pub dss_ratios: Vec<(f64, f64)>,
    pub control_ratios: Vec<(f64, f64)>,
    pub min_ratio: f64,
    pub rescaled: RescaledSeries,
    pub r1: Option<f64>,
    pub control_final_ratio: f64,
    pub min_ratio_pass: bool,
    pub r1_pass: bool,
    pub control_decays: bool,
    pub pass: bool,
}

fn weak_ratios(traj: &SolutionTrajectory) -> Vec<(f64, f64)> {
    let w0 = traj.series[0].l3winf;
    traj.series
        .iter()
        .map(|r| (r.t, if w0 > 0.0 { r.l3winf / w0 } else { 0.0 }))
        .collect()
}

/// Evolves the DSS datum and a single-shell control of equal weak norm
/// around the same background.
pub fn run_counterexample(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<CounterexampleReport, RunError> {
    let grid = setup::grid(cfg)?;
    let params = setup::dss_params(cfg)?;
    let dss = lnslab_core::dss::make_dss_data(grid, &params)?;
    let inequalities = annulus_inequalities(&dss, cfg.dss_lambda)?;
    if !inequalities.both_hold() {
        return Err(RunError::Refused(format!(
            "annulus inequalities fail: {}",
            inequalities.to_json()
        )));
    }
    let bg = setup::background(cfg, grid)?;
    let bfield = bg.as_ref().map(|b| &b.field);
    let mut scfg = solver_config(cfg);
    scfg.q = None;
    let degenerate = dss.weak_norm == 0.0;

    let traj = time_step_solve(&dss.field, bfield, &scfg)?;
    let dss_ratios = weak_ratios(&traj);
    let min_ratio = dss_ratios.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let rescaled = rescaled_norm_series(&traj, cfg.dss_lambda, cfg.dss_t0)?;
    let r1 = rescaled.rows.first().map(|r| r.ratio);

    let control: VectorField3 = single_shell_control(grid, &params, dss.weak_norm)?;
    let ctraj = time_step_solve(&control, bfield, &scfg)?;
    let control_ratios = weak_ratios(&ctraj);
    let control_final_ratio = control_ratios.last().map_or(0.0, |p| p.1);

    let min_ratio_pass = min_ratio >= cfg.min_ratio_target;
    let r1_pass = r1.is_some_and(|r| r >= cfg.r1_band[0] && r <= cfg.r1_band[1]);
    let control_decays = control_final_ratio < cfg.min_ratio_target;
    let report = CounterexampleReport {
        lambda: cfg.dss_lambda,
        amplitude: cfg.dss_amplitude,
        data_weak_norm: dss.weak_norm,
        divergence_relative: dss.divergence_relative,
        background_weak_norm: bg.as_ref().map_or(0.0, |b| b.weak_norm),
        inequalities,
        degenerate,
        dss_ratios,
        control_ratios,
        min_ratio,
        rescaled,
        r1,
        control_final_ratio,
        min_ratio_pass,
        r1_pass,
        control_decays,
        pass: degenerate || (min_ratio_pass && r1_pass && control_decays),
    };
    if let Some(dir) = out {
        traj.write_norm_csv(create(dir, "dss_norms.csv")?)?;
        ctraj.write_norm_csv(create(dir, "control_norms.csv")?)?;
        report.rescaled.write_csv(create(dir, "rescaled.csv")?)?;
        write_json(dir, "counterexample.json", &report)?;
    }
    Ok(report)
}

/// Free evolution of the configured datum, no assertions.
pub fn run_simulate(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<SolutionTrajectory, RunError> {
    let grid = setup::grid(cfg)?;
    let bg = setup::background(cfg, grid)?;
    let (u0, _) = setup::data(cfg, grid)?;
    let traj = time_step_solve(&u0, bg.as_ref().map(|b| &b.field), &solver_config(cfg))?;
    if let Some(dir) = out {
        traj.write_norm_csv(create(dir, "norms.csv")?)?;
    }
    Ok(traj)
}

/// Lorentz norms of the configured datum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormsReport {
    pub l2: f64,
    pub l3: f64,
    pub l3q: f64,
    pub q: f64,
    pub weak_l3: f64,
}

pub fn run_norms(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<NormsReport, RunError> {
    let grid = setup::grid(cfg)?;
    let (u0, _) = setup::data(cfg, grid)?;
    let report = NormsReport {
        l2: u0.lp_norm(2.0),
        l3: u0.lp_norm(3.0),
        l3q: lorentz_quasinorm(&u0, LorentzIndex::from_option(3.0, cfg.q_index())?),
        q: cfg.q,
        weak_l3: weak_l3(&u0),
    };
    if let Some(dir) = out {
        write_json(dir, "norms.json", &report)?;
    }
    Ok(report)
}
