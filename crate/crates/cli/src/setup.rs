//! Fields built from a config, shared by every scenario.

use lnslab_core::dss::{make_dss_data, DssField, DssParams};
use lnslab_core::landau::{landau_background, LandauParams, MollifiedBackground};
use lnslab_core::{sample_field, snapshot, Grid, VectorField3};

use crate::config::{BackgroundKind, DataKind, ExperimentConfig};
use crate::RunError;

pub fn grid(cfg: &ExperimentConfig) -> Result<Grid, RunError> {
    Ok(Grid::new(cfg.n, cfg.box_len)?)
}

pub fn background(cfg: &ExperimentConfig, grid: Grid) -> Result<Option<MollifiedBackground>, RunError> {
    match cfg.background {
        BackgroundKind::None => Ok(None),
        BackgroundKind::Landau => {
            let params = LandauParams::vertical(cfg.landau_a)?;
            Ok(Some(landau_background(grid, &params, cfg.r_cut)?))
        }
    }
}

pub fn dss_params(cfg: &ExperimentConfig) -> Result<DssParams, RunError> {
    Ok(DssParams::new(
        cfg.dss_lambda,
        cfg.dss_amplitude,
        cfg.dss_k_min,
        cfg.dss_k_max,
    )?)
}

pub fn bump(grid: Grid, amp: f64, center: [f64; 3], width: f64) -> Result<VectorField3, RunError> {
    let w2 = 2.0 * width * width;
    Ok(sample_field(grid, [0.0; 3], |x| {
        let y = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
        let e = amp * (-(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]) / w2).exp();
        [-y[1] * e, y[0] * e, 0.0]
    })?)
}

/// The initial datum, plus the DSS construction when the datum is one.
pub fn data(cfg: &ExperimentConfig, grid: Grid) -> Result<(VectorField3, Option<DssField>), RunError> {
    match cfg.data {
        DataKind::Zero => Ok((VectorField3::zeros(grid), None)),
        DataKind::Bump => Ok((bump(grid, cfg.bump_amplitude, cfg.bump_center, cfg.bump_width)?, None)),
        DataKind::Dss => {
            let d = make_dss_data(grid, &dss_params(cfg)?)?;
            Ok((d.field.clone(), Some(d)))
        }
        DataKind::Snapshot => {
            let f = snapshot::read(&cfg.snapshot_path)?;
            if *f.grid() != grid {
                return Err(RunError::Config(format!(
                    "snapshot grid n = {}, L = {} differs from configured n = {}, L = {}",
                    f.grid().n(),
                    f.grid().box_len(),
                    grid.n(),
                    grid.box_len()
                )));
            }
            Ok((f, None))
        }
    }
}
