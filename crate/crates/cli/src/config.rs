//! Flat key-value experiment configuration.
//!
//! A config file is a TOML table whose keys overlay the defaults of its
//! scenario. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use lnslab_core::mild_solver::Scheme;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default `ε₁`, the bound on `‖U‖_{3,∞}`.
///
/// Set by [`crate::calibrate::calibrate_thresholds`] with its default
/// sweep: starting from `(16, 64)` and halving both until the largest Picard
/// contraction ratio on the coarse grid is at most `7/8 + 0.05`. The sweep
/// rejected `(16, 64)` (iteration diverged) and `(8, 32)` (ratio 1.037) and
/// accepted `(4, 16)` with ratio 0.509.
pub const DEFAULT_EPS1: f64 = 4.0;
/// Default `ε₂`, the bound on `‖u0‖_{3,q}`, from the same sweep.
pub const DEFAULT_EPS2: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Stability,
    Counterexample,
    Verify,
    FixedpointDemo,
    Norms,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scenario::Stability => "stability",
            Scenario::Counterexample => "counterexample",
            Scenario::Verify => "verify",
            Scenario::FixedpointDemo => "fixedpoint_demo",
            Scenario::Norms => "norms",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundKind {
    Landau,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    /// `amp (-y₂, y₁, 0) e^{-|y|²/2w²}` with `y = x - center`.
    Bump,
    Dss,
    Snapshot,
    Zero,
}

/// Which smallness gate a stability run enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    /// `‖U‖_{3,∞} < ε₁` and `‖u0‖_{3,q} < ε₂`.
    Full,
    /// `A ≤ ε₁/2` and `‖u0‖_{3,q} ≤ ε₂/2`.
    Halved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub box_len: f64,

    pub background: BackgroundKind,
    pub landau_a: f64,
    pub r_cut: f64,

    pub data: DataKind,
    pub bump_amplitude: f64,
    pub bump_center: [f64; 3],
    pub bump_width: f64,
    pub dss_lambda: f64,
    pub dss_amplitude: f64,
    pub dss_k_min: i32,
    pub dss_k_max: i32,
    /// Start of the rescaled-norm cycle `[t0, λ² t0]`.
    pub dss_t0: f64,
    pub snapshot_path: String,

    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// Second Lorentz index of the tracked `L^{3,q}` series; `inf` allowed.
    pub q: f64,
    /// Norms are sampled every `stride` steps.
    pub stride: usize,

    pub eps1: f64,
    pub eps2: f64,
    pub gate: Gate,
    /// Required `‖u(t_end)‖_{L³} / ‖u0‖_{L³}` upper bound.
    pub decay_target: f64,
    /// Required lower bound on `min ‖u(t)‖_{3,∞} / ‖u0‖_{3,∞}`.
    pub min_ratio_target: f64,
    pub r1_band: [f64; 2],

    pub seed: u64,
    pub out: String,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config is not valid TOML: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl ExperimentConfig {
    /// Desk-scale defaults of each scenario.
    pub fn defaults(scenario: Scenario) -> Self {
        let base = Self {
            scenario,
            n: 64,
            box_len: 16.0,
            background: BackgroundKind::Landau,
            landau_a: 8.0,
            r_cut: 0.5,
            data: DataKind::Bump,
            bump_amplitude: 0.1,
            bump_center: [1.5, 0.0, 0.5],
            bump_width: 1.0,
            dss_lambda: 2.0,
            dss_amplitude: 0.3,
            dss_k_min: 1,
            dss_k_max: 4,
            dss_t0: 1.0,
            snapshot_path: String::new(),
            dt: 0.05,
            t_end: 20.0,
            scheme: Scheme::Etd2,
            q: 4.0,
            stride: 20,
            eps1: DEFAULT_EPS1,
            eps2: DEFAULT_EPS2,
            gate: Gate::Halved,
            decay_target: 0.5,
            min_ratio_target: 0.5,
            r1_band: [0.75, 1.25],
            seed: 0,
            out: "out".into(),
        };
        match scenario {
            Scenario::Counterexample => Self {
                n: 128,
                box_len: 64.0,
                r_cut: 1.0,
                data: DataKind::Dss,
                dt: 0.1,
                t_end: 4.0,
                q: f64::INFINITY,
                stride: 5,
                ..base
            },
            Scenario::Norms => Self {
                background: BackgroundKind::None,
                q: 3.0,
                ..base
            },
            _ => base,
        }
    }

    /// Parses `text` over the defaults of its `scenario` key, or of
    /// `fallback` when the key is absent.
    pub fn from_toml(text: &str, fallback: Scenario) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let scenario = match table.get("scenario") {
            Some(v) => v
                .clone()
                .try_into::<Scenario>()
                .map_err(|e| ConfigError::Invalid(format!("scenario: {e}")))?,
            None => fallback,
        };
        let mut merged = match toml::Value::try_from(Self::defaults(scenario)) {
            Ok(toml::Value::Table(t)) => t,
            _ => unreachable!("defaults serialize to a table"),
        };
        for (k, v) in table {
            merged.insert(k, v);
        }
        let cfg: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, fallback: Scenario) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, fallback)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// `q` as the solver expects it: `None` for `∞`.
    pub fn q_index(&self) -> Option<f64> {
        self.q.is_finite().then_some(self.q)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.n < 4 || self.n % 2 != 0 {
            return bad(format!("n must be even and at least 4, got {}", self.n));
        }
        let positive = [
            ("box_len", self.box_len),
            ("r_cut", self.r_cut),
            ("bump_width", self.bump_width),
            ("dt", self.dt),
            ("t_end", self.t_end),
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("dss_t0", self.dss_t0),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.landau_a > 1.0) {
            return bad(format!("landau_a must exceed 1, got {}", self.landau_a));
        }
        if !(self.dss_lambda > 1.0 && self.dss_lambda.is_finite()) {
            return bad(format!("dss_lambda must exceed 1, got {}", self.dss_lambda));
        }
        if !(self.q > 1.0) {
            return bad(format!("q must exceed 1, got {}", self.q));
        }
        if self.stride == 0 {
            return bad("stride must be at least 1".into());
        }
        if !(self.r1_band[0] <= self.r1_band[1]) {
            return bad(format!("r1_band is empty: {:?}", self.r1_band));
        }
        if self.data == DataKind::Snapshot && self.snapshot_path.is_empty() {
            return bad("data = \"snapshot\" needs snapshot_path".into());
        }
        Ok(())
    }
}
