//! Invariant suite over every module with a deterministic JSON report.
//!
//! Items run in a fixed order; randomness is drawn from the config seed.

use std::f64::consts::PI;

use lnslab_core::dss::{dss_value, exact_annulus_inequalities, DssParams};
use lnslab_core::landau::{annulus_points, divergence_refinement, landau_velocity, residual_report, LandauParams};
use lnslab_core::lorentz::{lorentz_quasinorm, weak_l3, LorentzIndex};
use lnslab_core::mild_solver::{energy_monitor, picard_solve, time_step_solve, Scheme, SolverConfig};
use lnslab_core::spectral::{heat_propagate, inequality_report, leray_project, InequalityKind, Spectral};
use lnslab_core::{sample_field, Grid, ScalarField, VectorField3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ExperimentConfig, Scenario};
use crate::demo::{r8_instance, scalar_oracle_error};
use crate::RunError;

/// Test hooks that corrupt one ingredient on purpose.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Faults {
    /// Reverse the polar component of the Landau formula.
    pub landau_sign_flip: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyItem {
    pub module: &'static str,
    pub name: &'static str,
    pub measured: f64,
    pub bound: Bound,
    pub threshold: f64,
    /// Distance to the threshold on the passing side; negative on failure.
    pub slack: f64,
    pub pass: bool,
}

impl VerifyItem {
    fn new(module: &'static str, name: &'static str, measured: f64, bound: Bound, threshold: f64) -> Self {
        let slack = match bound {
            Bound::AtMost => threshold - measured,
            Bound::AtLeast => measured - threshold,
        };
        Self {
            module,
            name,
            measured,
            bound,
            threshold,
            slack,
            pass: slack >= 0.0 && measured.is_finite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub items: Vec<VerifyItem>,
    pub pass: bool,
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn failed(&self) -> Vec<&VerifyItem> {
        self.items.iter().filter(|i| !i.pass).collect()
    }
}

fn max_rel(a: &VectorField3, b: &VectorField3) -> f64 {
    let scale = b.max_magnitude().max(f64::MIN_POSITIVE);
    a.axpy(-1.0, b).expect("same grid").max_magnitude() / scale
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> VectorField3 {
    let comps = [0; 3].map(|_| (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect());
    VectorField3::from_components(grid, comps).expect("finite")
}

fn shear(grid: Grid, amp: f64) -> VectorField3 {
    sample_field(grid, [0.0; 3], |x| {
        [
            amp * x[1].sin() * x[2].cos(),
            amp * x[2].sin() * x[0].cos(),
            amp * x[0].sin() * x[1].cos(),
        ]
    })
    .expect("finite")
}

fn grid_items(rng: &mut ChaCha8Rng) -> Result<Vec<VerifyItem>, RunError> {
    let g = Grid::new(8, 2.0)?;
    let c: [f64; 3] = [0; 3].map(|_| rng.gen_range(-1.0..1.0));
    let f = |x: [f64; 3]| [x[0] * c[0], (x[1] + c[1]).sin(), x[2] * x[2] * c[2]];
    let a = sample_field(g, [0.0; 3], f)?;
    let b = sample_field(g, [0.0; 3], f)?;
    Ok(vec![VerifyItem::new(
        "grid",
        "sampling_deterministic",
        a.axpy(-1.0, &b)?.max_magnitude(),
        Bound::AtMost,
        0.0,
    )])
}

fn lorentz_items(rng: &mut ChaCha8Rng) -> Result<Vec<VerifyItem>, RunError> {
    let g = Grid::new(8, 2.0)?;
    let mut identity: f64 = 0.0;
    let mut domination: f64 = 0.0;
    for _ in 0..10 {
        let u = random_field(g, rng);
        for p in [2.0, 2.5, 3.0, 4.0] {
            let lpp = lorentz_quasinorm(&u, LorentzIndex::finite(p, p)?);
            let lp = u.lp_norm(p);
            identity = identity.max((lpp - lp).abs() / lp);
        }
        domination = domination.max(weak_l3(&u) / u.lp_norm(3.0));
    }
    let mut indicator: f64 = 0.0;
    for _ in 0..5 {
        let values: Vec<f64> = (0..g.len()).map(|_| f64::from(rng.gen_bool(0.3) as u8)).collect();
        let measure = values.iter().sum::<f64>() * g.cell_measure();
        if measure == 0.0 {
            continue;
        }
        let f = ScalarField::new(g, values)?;
        let got = lorentz_quasinorm(&f, LorentzIndex::finite(3.0, 2.0)?);
        let want = 1.5f64.sqrt() * measure.cbrt();
        indicator = indicator.max((got - want).abs() / want);
    }
    Ok(vec![
        VerifyItem::new("lorentz", "lpp_equals_lp", identity, Bound::AtMost, 1e-10),
        VerifyItem::new("lorentz", "indicator_closed_form", indicator, Bound::AtMost, 1e-12),
        VerifyItem::new("lorentz", "weak_below_strong", domination, Bound::AtMost, 1.0 + 1e-12),
    ])
}

fn spectral_items(rng: &mut ChaCha8Rng) -> Result<Vec<VerifyItem>, RunError> {
    let g = Grid::new(16, 2.0 * PI)?;
    let ctx = Spectral::new(g);
    let u = random_field(g, rng);
    let s = ctx.forward(&u);
    let round_trip = max_rel(&ctx.inverse(&s), &u);
    let p = leray_project(&s);
    let pp = leray_project(&p);
    let idempotent = max_rel(&ctx.inverse(&pp), &ctx.inverse(&p));
    let grad = sample_field(g, [0.0; 3], |x| {
        [x[0].cos() * (2.0 * x[1]).sin(), 2.0 * x[0].sin() * (2.0 * x[1]).cos(), 0.0]
    })?;
    let annihilated = ctx.inverse(&leray_project(&ctx.forward(&grad))).max_magnitude() / grad.max_magnitude();
    let composed = heat_propagate(&heat_propagate(&p, 0.1)?, 0.2)?;
    let direct = heat_propagate(&p, 0.3)?;
    let semigroup = max_rel(&ctx.inverse(&composed), &ctx.inverse(&direct));
    let samples = vec![shear(g, 1.0), u];
    let heat = inequality_report(
        InequalityKind::Heat {
            p1: 3.0,
            p2: 3.0,
            q: Some(3.0),
        },
        &samples,
        &[0.01, 0.1],
    )?;
    Ok(vec![
        VerifyItem::new("spectral", "round_trip", round_trip, Bound::AtMost, 1e-12),
        VerifyItem::new("spectral", "leray_idempotent", idempotent, Bound::AtMost, 1e-12),
        VerifyItem::new("spectral", "gradient_annihilated", annihilated, Bound::AtMost, 1e-12),
        VerifyItem::new("spectral", "heat_semigroup", semigroup, Bound::AtMost, 1e-13),
        VerifyItem::new("spectral", "heat_l3_contraction", heat.max_ratio(), Bound::AtMost, 1.0 + 1e-12),
    ])
}

fn landau_items(faults: Faults) -> Result<Vec<VerifyItem>, RunError> {
    let mut params = LandauParams::vertical(2.0)?;
    if faults.landau_sign_flip {
        params = params.with_flipped_polar();
    }
    let residual = residual_report(&params, (1.0, 3.0), &[32, 64], 8.0)?;
    let pts = annulus_points(1.0, 3.0, 200, 11);
    let div = divergence_refinement(&params, &pts, &[0.04, 0.02, 0.01])?;
    let div_order = div.iter().filter_map(|r| r.order_estimate).fold(f64::INFINITY, f64::min);
    let mut homogeneity: f64 = 0.0;
    for x in annulus_points(0.2, 5.0, 200, 3) {
        let u = landau_velocity(x, &params)?;
        let v = landau_velocity(x.map(|c| 2.0 * c), &params)?;
        let n = u.iter().map(|c| c * c).sum::<f64>().sqrt();
        let e = (0..3).map(|i| (v[i] - u[i] / 2.0).powi(2)).sum::<f64>().sqrt();
        homogeneity = homogeneity.max(2.0 * e / n);
    }
    Ok(vec![
        VerifyItem::new(
            "landau",
            "stationary_residual_order",
            residual.final_order().unwrap_or(f64::NAN),
            Bound::AtLeast,
            1.8,
        ),
        VerifyItem::new("landau", "fd_divergence_order", div_order, Bound::AtLeast, 1.8),
        VerifyItem::new("landau", "homogeneity", homogeneity, Bound::AtMost, 1e-12),
    ])
}

fn fixedpoint_items(seed: u64) -> Result<Vec<VerifyItem>, RunError> {
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let inst = r8_instance(seed.wrapping_add(i));
        let (_, trace) = lnslab_core::fixedpoint::solve_picard(&inst.e0, &inst.b, &inst.u, &inst.config)?;
        worst = worst.max(trace.max_ratio());
    }
    Ok(vec![
        VerifyItem::new("fixedpoint", "scalar_oracle", scalar_oracle_error()?, Bound::AtMost, 1e-12),
        VerifyItem::new("fixedpoint", "r8_contraction", worst, Bound::AtMost, 7.0 / 8.0 + 1e-9),
    ])
}

fn solver_items() -> Result<Vec<VerifyItem>, RunError> {
    let g = Grid::new(16, 2.0 * PI)?;
    let u0 = shear(g, 0.5);
    let mut cfg = SolverConfig::new(0.002, 0.5);
    cfg.snapshot_stride = 50;
    cfg.store_snapshots = false;
    let traj = time_step_solve(&u0, None, &cfg)?;
    let energy = energy_monitor(&traj, None)?;

    let mut cfg = SolverConfig::new(0.05, 0.5);
    cfg.scheme = Scheme::Etd1;
    let pic = picard_solve(&u0, None, &cfg)?;
    let ts = time_step_solve(&u0, None, &cfg)?;
    let diff = pic
        .trajectory
        .snapshots
        .iter()
        .zip(&ts.snapshots)
        .map(|(a, b)| a.axpy(-1.0, b).expect("same grid").lp_norm(3.0) / b.lp_norm(3.0))
        .fold(0.0, f64::max);
    Ok(vec![
        VerifyItem::new(
            "mild_solver",
            "energy_equality_without_background",
            energy.balance_residual,
            Bound::AtMost,
            1e-6,
        ),
        VerifyItem::new("mild_solver", "picard_matches_etd1", diff, Bound::AtMost, 1e-3),
        VerifyItem::new("mild_solver", "divergence_free", ts.max_divergence, Bound::AtMost, 1e-11),
    ])
}

fn dss_items(rng: &mut ChaCha8Rng) -> Result<Vec<VerifyItem>, RunError> {
    let mut items = Vec::new();
    for (lambda, first, second) in [
        (2.0, "annulus_first_lambda2", "annulus_second_lambda2"),
        (4.0, "annulus_first_lambda4", "annulus_second_lambda4"),
    ] {
        let r = exact_annulus_inequalities(lambda, 1.0)?;
        items.push(VerifyItem::new("dss", first, r.annulus_vs_weak.lhs, Bound::AtMost, r.annulus_vs_weak.rhs));
        items.push(VerifyItem::new("dss", second, r.weak_vs_annulus.lhs, Bound::AtMost, r.weak_vs_annulus.rhs));
    }
    let p = DssParams::new(2.0, 1.0, 0, 6)?;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let r = rng.gen_range(1.0..32.0);
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi = rng.gen_range(0.0..2.0 * PI);
        let s = (1.0 - z * z).sqrt();
        let x = [r * s * phi.cos(), r * s * phi.sin(), r * z];
        let u = dss_value(x, &p);
        let v = dss_value(x.map(|c| 2.0 * c), &p);
        let scale = u.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-300);
        let e = (0..3).map(|i| (2.0 * v[i] - u[i]).powi(2)).sum::<f64>().sqrt();
        if scale > 1e-300 {
            worst = worst.max(e / scale);
        }
    }
    items.push(VerifyItem::new("dss", "scaling_relation", worst, Bound::AtMost, 1e-6));
    Ok(items)
}

fn cli_items() -> Vec<VerifyItem> {
    let d = ExperimentConfig::defaults(Scenario::Stability);
    let back = ExperimentConfig::from_toml(&d.to_toml(), Scenario::Verify);
    let same = matches!(back, Ok(ref c) if *c == d);
    vec![VerifyItem::new(
        "cli",
        "config_round_trip",
        if same { 0.0 } else { 1.0 },
        Bound::AtMost,
        0.0,
    )]
}

pub fn run_verify(cfg: &ExperimentConfig, faults: Faults) -> Result<VerifyReport, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut items = Vec::new();
    items.extend(grid_items(&mut rng)?);
    items.extend(lorentz_items(&mut rng)?);
    items.extend(spectral_items(&mut rng)?);
    items.extend(landau_items(faults)?);
    items.extend(fixedpoint_items(cfg.seed)?);
    items.extend(solver_items()?);
    items.extend(dss_items(&mut rng)?);
    items.extend(cli_items());
    let pass = items.iter().all(|i| i.pass);
    Ok(VerifyReport {
        seed: cfg.seed,
        items,
        pass,
    })
}
