//! Run configuration: defaults, file loading (TOML, JSON, or a manifest's
//! `config` key) and validation before any computation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sojourn_core::berman::Estimator;
use sojourn_core::lab::{GridScaling, QueueRegime, ScalingFamily, TargetConfig};

use crate::CliError;

/// Constants the `estimate-constant` command knows how to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantFamily {
    /// `B_α^h(x, [a, b])` on a finite interval.
    #[default]
    Berman1d,
    /// `lim B_α(x, [0, S]) / S` from a linear fit over a schedule of `S`.
    Limit,
    /// `lim B_α(0, [0, S]) / S`.
    Pickands,
    /// Two-dimensional constant on the `G(S, ...)` domain.
    Berman2d,
    /// Mixed sojourn/supremum constant, direct and product estimates.
    Bhat,
    /// Per-unit-length constant over a truncated whole line.
    WholeLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantConfig {
    pub family: ConstantFamily,
    pub alpha: f64,
    /// Second-axis exponent (`berman2d`, `bhat`).
    pub alpha2: f64,
    /// Drift `b|t|^β` on the first axis; `b = 0` disables it.
    pub b: f64,
    pub beta: f64,
    pub b2: f64,
    pub beta2: f64,
    pub xs: Vec<f64>,
    pub interval: [f64; 2],
    /// Grid points on the interval; derived from `points_per_unit` if absent.
    pub n_grid: Option<usize>,
    pub points_per_unit: f64,
    /// `S` of the two-dimensional domain rule.
    pub s: f64,
    /// `S` values for limits, or rest-axis lengths for `bhat`.
    pub schedule: Vec<f64>,
    /// First-axis length for `bhat`.
    pub n1: f64,
    pub half_width: Option<f64>,
    pub samples: usize,
    pub estimator: Estimator,
    /// Repeat each `berman1d` estimate at half the step and flag movements
    /// beyond two standard errors.
    pub check_grid: bool,
}

impl Default for ConstantConfig {
    fn default() -> Self {
        Self {
            family: ConstantFamily::Berman1d,
            alpha: 1.0,
            alpha2: 1.0,
            b: 0.0,
            beta: 1.0,
            b2: 0.0,
            beta2: 1.0,
            xs: vec![0.0],
            interval: [0.0, 1.0],
            n_grid: None,
            points_per_unit: 1024.0,
            s: 4.0,
            schedule: vec![4.0, 8.0, 16.0],
            n1: 2.0,
            half_width: None,
            samples: 100_000,
            estimator: Estimator::Tilted,
            check_grid: false,
        }
    }
}

/// What `run-experiment` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Empirical conditional sojourn curve against its target.
    #[default]
    Conditional,
    /// Queue short-window probability: prediction against simulation.
    QueuePrediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentCmdConfig {
    pub kind: ExperimentKind,
    pub family: ScalingFamily,
    pub levels: Vec<f64>,
    pub xs: Vec<f64>,
    pub horizon: f64,
    pub points_per_unit: f64,
    /// Grid density in rescaled time per level; overrides
    /// `points_per_unit` and the target density when set.
    pub local_points_per_unit: Option<f64>,
    pub n_target_conditioned: usize,
    pub max_replicates: usize,
    pub round_replicates: usize,
    pub queue_regime: QueueRegime,
    pub queue_horizon_mult: f64,
    pub target: TargetConfig,
    /// Queue prediction: window length `n` and sojourn `x` in units of `v(u)`.
    pub n: f64,
    pub x: f64,
    pub samples: usize,
    pub bhat_samples: usize,
}

impl Default for ExperimentCmdConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Conditional,
            family: ScalingFamily::Chi { m: 1, a: 1.0, alpha: 1.0 },
            levels: vec![2.5, 3.0, 3.5],
            xs: (0..=16).map(|k| k as f64 * 0.25).collect(),
            horizon: 1.0,
            points_per_unit: 1024.0,
            local_points_per_unit: None,
            n_target_conditioned: 2000,
            max_replicates: 2_000_000,
            round_replicates: 16_384,
            queue_regime: QueueRegime::Finite { t: 4.0 },
            queue_horizon_mult: 5.0,
            target: TargetConfig::default(),
            n: 2.0,
            x: 0.0,
            samples: 200_000,
            bhat_samples: 100_000,
        }
    }
}

impl ExperimentCmdConfig {
    pub fn grid_scaling(&self) -> GridScaling {
        match self.local_points_per_unit {
            Some(points_per_unit) => GridScaling::Local { points_per_unit },
            None => GridScaling::Fixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoubleSumCmdConfig {
    pub family: ScalingFamily,
    pub u: f64,
    pub horizon: f64,
    pub points_per_unit: f64,
    pub n_values: Vec<f64>,
    pub samples: usize,
    pub control: bool,
}

impl Default for DoubleSumCmdConfig {
    fn default() -> Self {
        Self {
            family: ScalingFamily::Stationary1D { a: 1.0, alpha: 1.0 },
            u: 3.0,
            horizon: 2.0,
            points_per_unit: 512.0,
            n_values: vec![2.0, 4.0, 8.0],
            samples: 200_000,
            control: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OracleFamily {
    /// `B_2(x, [0, S])` by quadrature (`α = 2` only).
    #[default]
    Parabola,
    /// `B_1(0, [0, S])` in closed form.
    BrownianSup,
    /// Closed forms of the queue asymptotics at each level.
    Queue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub family: OracleFamily,
    /// Defaults to 2 for the parabola oracle and 1 for the queue.
    pub alpha: Option<f64>,
    pub xs: Vec<f64>,
    pub s_values: Vec<f64>,
    pub quadrature_order: usize,
    pub c: f64,
    pub levels: Vec<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            family: OracleFamily::Parabola,
            alpha: None,
            xs: vec![0.0, 0.2, 0.5],
            s_values: vec![1.0],
            quadrature_order: 64,
            c: 1.0,
            levels: vec![4.0, 6.0, 8.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub alpha: f64,
    pub alpha2: f64,
    pub b: f64,
    pub beta: f64,
    pub b2: f64,
    pub beta2: f64,
    pub x: f64,
    pub schedule: Vec<f64>,
    pub points_per_unit: f64,
    pub samples: usize,
    pub estimator: Estimator,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            alpha2: 1.0,
            b: 0.0,
            beta: 1.0,
            b2: 0.0,
            beta2: 1.0,
            x: 0.0,
            schedule: vec![1.0, 2.0, 4.0],
            points_per_unit: 32.0,
            samples: 20_000,
            estimator: Estimator::Tilted,
        }
    }
}

/// Everything a run needs; only the section of the chosen command is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Drawn at random and recorded when absent.
    pub seed: Option<u64>,
    /// `0` uses every available core; results do not depend on it.
    pub workers: usize,
    pub chunk_size: usize,
    pub batches: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<ConstantConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentCmdConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub double_sum: Option<DoubleSumCmdConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            workers: 0,
            chunk_size: 1024,
            batches: 32,
            constant: None,
            experiment: None,
            double_sum: None,
            oracle: None,
            convergence: None,
        }
    }
}

/// Reads a TOML or JSON config; a JSON manifest is accepted through its
/// `config` key, so a finished run can be replayed from its manifest.
pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    if is_json {
        let mut value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(inner) = value.get_mut("config").filter(|c| c.is_object()) {
            value = inner.take();
        }
        serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub(crate) fn require(cond: bool, field: &str, reason: impl FnOnce() -> String) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{field}`: {}", reason())))
    }
}

impl RunConfig {
    pub fn validate_common(&self) -> Result<(), CliError> {
        require(self.chunk_size >= 1, "chunk_size", || "must be at least 1".into())?;
        require(self.batches >= sojourn_core::mc::MIN_BATCHES, "batches", || {
            format!("must be at least {}", sojourn_core::mc::MIN_BATCHES)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_sections_fill_defaults() {
        let cfg: RunConfig = toml::from_str(
            "seed = 7\n[constant]\nfamily = \"berman2d\"\nalpha2 = 2.0\n",
        )
        .unwrap();
        let c = cfg.constant.unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(c.family, ConstantFamily::Berman2d);
        assert_eq!(c.alpha2, 2.0);
        assert_eq!(c.alpha, 1.0);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 7\n").is_err());
        assert!(toml::from_str::<RunConfig>("[constant]\nalpah = 1.0\n").is_err());
    }

    #[test]
    fn manifest_config_key_is_unwrapped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.json");
        std::fs::write(&p, r#"{"artifact_version": "0", "config": {"seed": 3, "workers": 2}}"#).unwrap();
        let cfg = load(&p).unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.workers, 2);
    }

    #[test]
    fn family_round_trips_through_json() {
        let e = ExperimentCmdConfig::default();
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentCmdConfig>(&s).unwrap(), e);
    }
}
