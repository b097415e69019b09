//! Empirical ratio tables for the heat, convolution and Oseen estimates.

use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{heat_propagate, oseen_apply, Spectral, SpectralError};
use crate::grid::{sample_field, Grid, ScalarField, VectorField3};
use crate::lorentz::{convolve, lorentz_quasinorm, LorentzIndex};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InequalityKind {
    /// `‖e^{tΔ}f‖_{p1,q} t^{(3/2)(1/p2-1/p1)} / ‖f‖_{p2,q}`; `q = None` is `∞`.
    Heat { p1: f64, p2: f64, q: Option<f64> },
    /// `‖f*g‖_{r,s} / (‖f‖_{p1,q1} ‖g‖_{p2,q2})` with `f = g = |sample|`.
    ONeil {
        p1: f64,
        q1: Option<f64>,
        p2: f64,
        q2: Option<f64>,
        r: f64,
        s: Option<f64>,
    },
    /// `‖D^α ℙ e^{tΔ} f‖_p t^{|α|/2 + (3/2)(1/3-1/p)} / ‖f‖_{3,∞}`.
    Oseen { p: f64, alpha: [u32; 3] },
}

fn inv(q: Option<f64>) -> f64 {
    q.map_or(0.0, |q| 1.0 / q)
}

impl InequalityKind {
    pub fn label(&self) -> &'static str {
        match self {
            InequalityKind::Heat { .. } => "heat",
            InequalityKind::ONeil { .. } => "oneil",
            InequalityKind::Oseen { .. } => "oseen",
        }
    }

    /// Predicted power of `t` in `‖out‖/‖in‖`, if the kind has one.
    pub fn predicted_exponent(&self) -> Option<f64> {
        match *self {
            InequalityKind::Heat { p1, p2, .. } => Some(-1.5 * (1.0 / p2 - 1.0 / p1)),
            InequalityKind::Oseen { p, alpha } => {
                let order: u32 = alpha.iter().sum();
                Some(-(order as f64) / 2.0 - 1.5 * (1.0 / 3.0 - 1.0 / p))
            }
            InequalityKind::ONeil { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        let bad = |msg: String| Err(SpectralError::Exponents(msg));
        let q_ok = |q: Option<f64>| q.map_or(true, |q| q.is_finite() && q > 1.0);
        match *self {
            InequalityKind::Heat { p1, p2, q } => {
                if !(p2 > 1.0 && p2 <= p1 && p1.is_finite()) {
                    return bad(format!(
                        "heat estimate needs 1 < p2 <= p1 < inf, got p1 = {p1}, p2 = {p2}"
                    ));
                }
                if !q_ok(q) {
                    return bad(format!("second index must exceed 1, got {q:?}"));
                }
            }
            InequalityKind::ONeil {
                p1,
                q1,
                p2,
                q2,
                r,
                s,
            } => {
                if !(p1 > 1.0 && p2 > 1.0 && p2 <= p1 && p1.is_finite()) {
                    return bad(format!(
                        "convolution needs 1 < p2 <= p1 < inf, got p1 = {p1}, p2 = {p2}"
                    ));
                }
                if !(r > 1.0 && r.is_finite()) {
                    return bad(format!(
                        "convolution target index r = {r} must be finite and exceed 1"
                    ));
                }
                if (1.0 / r + 1.0 - 1.0 / p1 - 1.0 / p2).abs() > 1e-12 {
                    return bad(format!(
                        "1/r + 1 = 1/p1 + 1/p2 fails for r = {r}, p1 = {p1}, p2 = {p2}"
                    ));
                }
                if !(q_ok(q1) && q_ok(q2) && q_ok(s)) {
                    return bad("second indices must exceed 1".into());
                }
                if inv(s) > inv(q1) + inv(q2) + 1e-12 {
                    return bad(format!(
                        "1/s <= 1/q1 + 1/q2 fails for s = {s:?}, q1 = {q1:?}, q2 = {q2:?}"
                    ));
                }
            }
            InequalityKind::Oseen { p, alpha } => {
                if !(p >= 3.0 && p.is_finite()) {
                    return bad(format!("Oseen estimate needs 3 <= p < inf, got {p}"));
                }
                let order: u32 = alpha.iter().sum();
                if order > 2 {
                    return Err(SpectralError::DerivativeOrder(order));
                }
            }
        }
        Ok(())
    }
}

/// A finite family of sample fields, possibly depending on `t`.
pub trait SampleFamily {
    fn count(&self) -> usize;
    fn sample(&self, id: usize, t: f64) -> VectorField3;
}

impl SampleFamily for [VectorField3] {
    fn count(&self) -> usize {
        self.len()
    }
    fn sample(&self, id: usize, _t: f64) -> VectorField3 {
        self[id].clone()
    }
}

impl SampleFamily for Vec<VectorField3> {
    fn count(&self) -> usize {
        self.len()
    }
    fn sample(&self, id: usize, _t: f64) -> VectorField3 {
        self[id].clone()
    }
}

/// Mean-free Gaussian packets `(x₁/w) e^{-|x|²/2w²}` of width `w = shape·√t`
/// at time `t`, with a seeded sub-cell center offset and a seeded
/// polarization per sample.
#[derive(Debug, Clone)]
pub struct DiffusiveGaussians {
    pub grid: Grid,
    pub shape: f64,
    pub count: usize,
    pub seed: u64,
}

impl DiffusiveGaussians {
    fn params(&self, id: usize) -> ([f64; 3], [f64; 3]) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(id as u64));
        let h = self.grid.spacing();
        let center = [0; 3].map(|_| rng.gen_range(-0.5 * h..0.5 * h));
        let mut pol = [0; 3].map(|_| rng.gen_range(-1.0..1.0));
        let norm = pol.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        pol.iter_mut().for_each(|v| *v /= norm);
        (center, pol)
    }
}

impl SampleFamily for DiffusiveGaussians {
    fn count(&self) -> usize {
        self.count
    }
    fn sample(&self, id: usize, t: f64) -> VectorField3 {
        let (c, pol) = self.params(id);
        let w2 = self.shape * self.shape * t;
        sample_field(self.grid, [0.0; 3], |x| {
            let r2: f64 = (0..3).map(|d| (x[d] - c[d]).powi(2)).sum();
            let g = (x[0] - c[0]) / w2.sqrt() * (-r2 / (2.0 * w2)).exp();
            [pol[0] * g, pol[1] * g, pol[2] * g]
        })
        .expect("Gaussian samples are finite")
    }
}

/// Seeded mean-free Gaussian bumps with random centers and widths.
pub fn random_gaussians(
    grid: Grid,
    count: usize,
    widths: (f64, f64),
    seed: u64,
) -> Vec<VectorField3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.box_len();
    (0..count)
        .map(|_| {
            let w = rng.gen_range(widths.0..=widths.1);
            let c = [0; 3].map(|_| rng.gen_range(-0.25 * l..0.25 * l));
            let pol = [0; 3].map(|_| rng.gen_range(-1.0..1.0));
            let u = sample_field(grid, [0.0; 3], |x| {
                let r2: f64 = (0..3).map(|d| (x[d] - c[d]).powi(2)).sum();
                let g = (-r2 / (2.0 * w * w)).exp();
                [pol[0] * g, pol[1] * g, pol[2] * g]
            })
            .expect("Gaussian samples are finite");
            let comps = u.into_components().map(|mut v| {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                v.iter_mut().for_each(|x| *x -= mean);
                v
            });
            VectorField3::from_components(grid, comps).expect("finite")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    pub kind: &'static str,
    pub sample_id: usize,
    pub t: Option<f64>,
    pub ratio: f64,
    pub fitted_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioTable {
    pub kind: InequalityKind,
    pub rows: Vec<RatioRow>,
    /// Least-squares slope of `log(‖out‖/‖in‖)` against `log t`, per sample.
    pub slopes: Vec<Option<f64>>,
}

impl RatioTable {
    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| r.ratio.is_finite())
    }

    pub fn mean_slope(&self) -> Option<f64> {
        let s: Vec<f64> = self.slopes.iter().flatten().copied().collect();
        (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64)
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

fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

pub fn inequality_report<S: SampleFamily + ?Sized>(
    kind: InequalityKind,
    samples: &S,
    t_grid: &[f64],
) -> Result<RatioTable, SpectralError> {
    kind.validate()?;
    let label = kind.label();
    let mut rows = Vec::new();
    let mut slopes = Vec::new();

    if let InequalityKind::ONeil {
        p1,
        q1,
        p2,
        q2,
        r,
        s,
    } = kind
    {
        let (i1, i2, io) = (
            LorentzIndex::from_option(p1, q1)?,
            LorentzIndex::from_option(p2, q2)?,
            LorentzIndex::from_option(r, s)?,
        );
        for id in 0..samples.count() {
            let u = samples.sample(id, 1.0);
            let f = ScalarField::new(*u.grid(), u.magnitudes())?;
            let conv = convolve(&f, &f)?;
            let ratio = lorentz_quasinorm(&conv, io)
                / (lorentz_quasinorm(&f, i1) * lorentz_quasinorm(&f, i2));
            rows.push(RatioRow {
                kind: label,
                sample_id: id,
                t: None,
                ratio,
                fitted_slope: None,
            });
            slopes.push(None);
        }
        return Ok(RatioTable { kind, rows, slopes });
    }

    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(SpectralError::BadTimeGrid);
    }
    let exponent = kind.predicted_exponent().expect("time-dependent kind");
    for id in 0..samples.count() {
        let mut logs_t = Vec::new();
        let mut logs_r = Vec::new();
        let mut ratios = Vec::new();
        for &t in t_grid {
            let u = samples.sample(id, t);
            let ctx = Spectral::new(*u.grid());
            let s = ctx.forward(&u);
            let (num, den) = match kind {
                InequalityKind::Heat { p1, p2, q } => {
                    let out = ctx.inverse(&heat_propagate(&s, t)?);
                    (
                        lorentz_quasinorm(&out, LorentzIndex::from_option(p1, q)?),
                        lorentz_quasinorm(&u, LorentzIndex::from_option(p2, q)?),
                    )
                }
                InequalityKind::Oseen { p, alpha } => {
                    let out = ctx.inverse(&oseen_apply(&s, t, alpha)?);
                    (
                        out.lp_norm(p),
                        lorentz_quasinorm(&u, LorentzIndex::weak(3.0)?),
                    )
                }
                InequalityKind::ONeil { .. } => unreachable!(),
            };
            logs_t.push(t.ln());
            logs_r.push((num / den).ln());
            ratios.push((t, num * t.powf(-exponent) / den));
        }
        let slope = fit_slope(&logs_t, &logs_r);
        for (t, ratio) in ratios {
            rows.push(RatioRow {
                kind: label,
                sample_id: id,
                t: Some(t),
                ratio,
                fitted_slope: slope,
            });
        }
        slopes.push(slope);
    }
    Ok(RatioTable { kind, rows, slopes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_relations_rejected_up_front() {
        let g = Grid::new(8, 1.0).unwrap();
        let empty: Vec<VectorField3> = vec![VectorField3::zeros(g)];
        let bad = [
            InequalityKind::Heat {
                p1: 2.0,
                p2: 3.0,
                q: None,
            },
            InequalityKind::Heat {
                p1: 3.0,
                p2: 1.0,
                q: None,
            },
            InequalityKind::ONeil {
                p1: 1.5,
                q1: None,
                p2: 1.5,
                q2: None,
                r: 2.0,
                s: None,
            },
            InequalityKind::ONeil {
                p1: 1.5,
                q1: Some(4.0),
                p2: 1.5,
                q2: Some(4.0),
                r: 3.0,
                s: Some(1.5),
            },
            InequalityKind::Oseen {
                p: 2.0,
                alpha: [0, 0, 0],
            },
            InequalityKind::Oseen {
                p: 6.0,
                alpha: [2, 1, 0],
            },
        ];
        for k in bad {
            assert!(inequality_report(k, &empty, &[0.1]).is_err(), "{k:?}");
        }
        let ok = InequalityKind::Heat {
            p1: 3.0,
            p2: 3.0,
            q: None,
        };
        assert!(matches!(
            inequality_report(ok, &empty, &[]),
            Err(SpectralError::BadTimeGrid)
        ));
        assert!(matches!(
            inequality_report(ok, &empty, &[0.0]),
            Err(SpectralError::BadTimeGrid)
        ));
    }

    #[test]
    fn slope_fit_on_exact_power() {
        let xs: Vec<f64> = (1..6).map(|i| (i as f64).ln()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -0.75 * x + 2.0).collect();
        assert!((fit_slope(&xs, &ys).unwrap() + 0.75).abs() < 1e-14);
        assert!(fit_slope(&xs[..1], &ys[..1]).is_none());
    }

    #[test]
    fn predicted_exponents() {
        let k = InequalityKind::Oseen {
            p: 6.0,
            alpha: [1, 0, 0],
        };
        assert!((k.predicted_exponent().unwrap() + 0.75).abs() < 1e-15);
        let k = InequalityKind::Heat {
            p1: 6.0,
            p2: 2.0,
            q: Some(2.0),
        };
        assert!((k.predicted_exponent().unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn csv_columns() {
        let g = Grid::new(16, 4.0).unwrap();
        let fam = DiffusiveGaussians {
            grid: g,
            shape: 2.0,
            count: 2,
            seed: 3,
        };
        let k = InequalityKind::Heat {
            p1: 3.0,
            p2: 3.0,
            q: None,
        };
        let table = inequality_report(k, &fam, &[0.05, 0.1]).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("kind,sample_id,t,ratio,fitted_slope\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
