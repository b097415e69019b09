//! Fixed-point demonstration on seeded `ℝ⁸` instances, and the field
//! generators.

use std::path::Path;

use lnslab_core::dss::{annulus_inequalities, make_dss_data, AnnulusReport};
use lnslab_core::fixedpoint::{
    solve_picard, uniqueness_probe, Euclidean, NormedSpace, PicardConfig, ScalarProduct, TensorBilinear,
    UniquenessBound,
};
use lnslab_core::snapshot;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::{create, setup, write_json, RunError};

pub const DEMO_INSTANCES: usize = 50;
pub const UNIQUENESS_TRIALS: usize = 5;

/// A random instance that satisfies every hypothesis: `ε < 1/(4C_B)`,
/// `‖e₀‖ ≤ ε` and `‖U‖ < 1/(16 C_B)`, the last giving the linear bound
/// `‖B(e,U)‖ + ‖B(U,e)‖ ≤ ‖e‖/8`.
pub struct R8Instance {
    pub b: TensorBilinear,
    pub e0: Euclidean,
    pub u: Euclidean,
    pub config: PicardConfig,
}

pub fn r8_instance(seed: u64) -> R8Instance {
    use lnslab_core::fixedpoint::Bilinear;
    let b = TensorBilinear::random_unit(8, seed);
    let cb = b.bound();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let eps = rng.gen_range(0.05..0.99) / (4.0 * cb);
    let template = Euclidean(vec![0.0; 8]);
    let e0 = template.random_unit(&mut rng).scale(eps * rng.gen_range(0.1..1.0));
    let u = template
        .random_unit(&mut rng)
        .scale(rng.gen_range(0.0..0.99) / (16.0 * cb));
    let mut config = PicardConfig::new(eps);
    config.seed = seed;
    R8Instance { b, e0, u, config }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceResult {
    pub seed: u64,
    pub eps: f64,
    pub iterations: usize,
    pub max_ratio: f64,
    pub max_norm: f64,
    pub final_residual: f64,
    pub uniqueness_radius: f64,
    pub active_bound: UniquenessBound,
    pub uniqueness_spread: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointDemo {
    /// `|e - e*|` for the scalar problem `e = e₀ - e² - 2ue` against its
    /// closed-form root, over a small grid of `(e₀, u)`.
    pub scalar_oracle_error: f64,
    pub instances: Vec<InstanceResult>,
    pub worst_ratio: f64,
    pub worst_spread: f64,
    pub pass: bool,
}

pub fn scalar_oracle_error() -> Result<f64, RunError> {
    let mut worst: f64 = 0.0;
    for &e0 in &[0.0, 0.01, 0.1, 0.2, 0.25] {
        for &u in &[0.0, 0.02, 1.0 / 16.0] {
            let (e, _) = solve_picard(&e0, &ScalarProduct, &u, &PicardConfig::new(0.25))?;
            let b = 1.0 + 2.0 * u;
            let root = (-b + (b * b + 4.0 * e0).sqrt()) / 2.0;
            worst = worst.max((e - root).abs());
        }
    }
    Ok(worst)
}

pub fn run_fixedpoint_demo(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<FixedPointDemo, RunError> {
    let scalar_oracle_error = scalar_oracle_error()?;
    let mut instances = Vec::with_capacity(DEMO_INSTANCES);
    for i in 0..DEMO_INSTANCES {
        let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        let inst = r8_instance(seed);
        let (_, trace) = solve_picard(&inst.e0, &inst.b, &inst.u, &inst.config)?;
        let uq = uniqueness_probe(&inst.e0, &inst.b, &inst.u, &inst.config, UNIQUENESS_TRIALS)?;
        if i == 0 {
            if let Some(dir) = out {
                trace.write_csv(create(dir, "picard_trace.csv")?)?;
            }
        }
        let max_ratio = trace.max_ratio();
        let max_norm = trace.max_norm();
        let eps = inst.config.eps;
        instances.push(InstanceResult {
            seed,
            eps,
            iterations: trace.iterations(),
            max_ratio,
            max_norm,
            final_residual: trace.final_residual,
            uniqueness_radius: uq.radius,
            active_bound: uq.active_bound,
            uniqueness_spread: uq.max_pairwise,
            pass: max_ratio <= 7.0 / 8.0 + 1e-9 && max_norm <= 1.5 * eps && uq.max_pairwise <= 1e-10,
        });
    }
    let worst_ratio = instances.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    let worst_spread = instances.iter().map(|r| r.uniqueness_spread).fold(0.0, f64::max);
    let report = FixedPointDemo {
        pass: scalar_oracle_error <= 1e-12 && instances.iter().all(|r| r.pass),
        scalar_oracle_error,
        instances,
        worst_ratio,
        worst_spread,
    };
    if let Some(dir) = out {
        write_json(dir, "fixedpoint.json", &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandauSummary {
    pub a: f64,
    pub r_cut: f64,
    pub weak_norm: f64,
    pub projection_correction: f64,
    pub deviation_from_exact: f64,
}

/// Writes the mollified background as `landau.snap` plus a summary.
pub fn landau_gen(cfg: &ExperimentConfig, out: &Path) -> Result<LandauSummary, RunError> {
    let grid = setup::grid(cfg)?;
    let params = lnslab_core::landau::LandauParams::vertical(cfg.landau_a)?;
    let bg = lnslab_core::landau::landau_background(grid, &params, cfg.r_cut)?;
    std::fs::create_dir_all(out)?;
    snapshot::write(&bg.field, out.join("landau.snap"))?;
    let summary = LandauSummary {
        a: cfg.landau_a,
        r_cut: cfg.r_cut,
        weak_norm: bg.weak_norm,
        projection_correction: bg.projection_correction,
        deviation_from_exact: bg.deviation_from_exact,
    };
    write_json(out, "landau.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DssSummary {
    pub lambda: f64,
    pub amplitude: f64,
    pub k_min: i32,
    pub k_max: i32,
    pub weak_norm: f64,
    pub amplitude_ratio: f64,
    pub divergence_relative: f64,
    pub inequalities: AnnulusReport,
}

/// Writes the DSS datum as `dss.snap` plus its inequality report.
pub fn dss_gen(cfg: &ExperimentConfig, out: &Path) -> Result<DssSummary, RunError> {
    let grid = setup::grid(cfg)?;
    let d = make_dss_data(grid, &setup::dss_params(cfg)?)?;
    let inequalities = annulus_inequalities(&d, cfg.dss_lambda)?;
    std::fs::create_dir_all(out)?;
    snapshot::write(&d.field, out.join("dss.snap"))?;
    let summary = DssSummary {
        lambda: cfg.dss_lambda,
        amplitude: cfg.dss_amplitude,
        k_min: cfg.dss_k_min,
        k_max: cfg.dss_k_max,
        weak_norm: d.weak_norm,
        amplitude_ratio: d.amplitude_ratio,
        divergence_relative: d.divergence_relative,
        inequalities,
    };
    write_json(out, "dss.json", &summary)?;
    Ok(summary)
}
