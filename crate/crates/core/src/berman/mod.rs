//! Monte Carlo estimators of Berman-type sojourn constants
//! `B(x, E) = ∫ P(mes{t ∈ E : W(t) > z} > x) e^z dz` and their per-volume
//! limits, plus analytic reference values.
//!
//! Every estimator uses the per-path identity `∫ I(mes{W > z} > x) e^z dz
//! = e^{z_x}`, so a curve over several `x` is computed from one shared set
//! of paths and is nonincreasing in `x` sample by sample.

mod axis;
pub mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::gauss::DriftSpec;
use crate::grid::GridSpec;
use crate::mc::{self, McSettings, SampleMatrix};
use crate::rng::derive_seed;
use crate::sojourn::{levels_for_sojourns, max_value, Level};

use axis::{symmetric_grid, AxisMode, AxisPlan, AxisSampler};

pub use oracle::{berman2_parabola_oracle, berman2_parabola_oracle_2d, brownian_sup_oracle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Plain average of `e^{z_x}`.
    Crude,
    /// Shift-mixture change of measure; same mean, bounded relative
    /// variance on long domains.
    #[default]
    Tilted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BermanSettings {
    pub mc: McSettings,
    pub estimator: Estimator,
    pub antithetic: bool,
}

impl BermanSettings {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self {
            mc: McSettings::new(n_samples, seed),
            estimator: Estimator::Tilted,
            antithetic: false,
        }
    }

    pub fn with_estimator(mut self, estimator: Estimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.mc.seed = seed;
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.mc.n_samples = n;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.mc.workers = workers;
        self
    }

    fn derived(&self, label: u64) -> Self {
        self.with_seed(derive_seed(self.mc.seed, label))
    }

    fn mode(&self) -> AxisMode {
        match self.estimator {
            Estimator::Crude => AxisMode::Crude,
            Estimator::Tilted => AxisMode::Tilted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainDescriptor {
    Interval { start: f64, end: f64 },
    Rectangle { axis1: (f64, f64), axis2: (f64, f64) },
    Product { intervals: Vec<(f64, f64)> },
    WholeLine { half_widths: Vec<f64> },
    Limit { schedule: Vec<f64> },
}

impl DomainDescriptor {
    fn of_axes(axes: &[AxisPlan]) -> Self {
        let iv: Vec<(f64, f64)> = axes.iter().map(|a| (a.grid().start, a.grid().end)).collect();
        match iv.as_slice() {
            [(a, b)] => Self::Interval { start: *a, end: *b },
            [a, b] => Self::Rectangle { axis1: *a, axis2: *b },
            _ => Self::Product { intervals: iv },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub x: f64,
    pub value: f64,
    pub std_err: f64,
    pub n_samples: usize,
    /// Grid step of the first axis.
    pub grid_step: f64,
    pub domain: DomainDescriptor,
    /// Divisor applied to the raw domain integral (`S`, `S²`, `1`, ...).
    pub normalization: f64,
    pub seed: u64,
    /// `x` is at least the size of the domain, so the value is exactly 0
    /// without simulation.
    pub vanishing_by_bound: bool,
}

/// Which domain `G(S, α1, β1, α2, β2)` to use for a two-dimensional
/// constant: axis `i` is `[0, S]` and contributes a factor `S` to the
/// normalization when `α_i < β_i`, and is `[−S, S]` without normalization
/// otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainRule {
    pub s: f64,
    pub normalized: [bool; 2],
}

impl DomainRule {
    /// `beta_i = f64::INFINITY` encodes a vanishing drift.
    pub fn from_exponents(s: f64, alpha1: f64, beta1: f64, alpha2: f64, beta2: f64) -> Result<Self> {
        ensure(s > 0.0, "S", || format!("must be positive, got {s}"))?;
        Ok(Self {
            s,
            normalized: [alpha1 < beta1, alpha2 < beta2],
        })
    }

    pub fn for_drifts(s: f64, alpha1: f64, drift1: DriftSpec, alpha2: f64, drift2: DriftSpec) -> Result<Self> {
        let beta = |d: DriftSpec| if d.is_zero() { f64::INFINITY } else { d.exponent };
        Self::from_exponents(s, alpha1, beta(drift1), alpha2, beta(drift2))
    }

    pub fn with_s(self, s: f64) -> Self {
        Self { s, ..self }
    }

    pub fn axis(&self, i: usize) -> (f64, f64) {
        if self.normalized[i] {
            (0.0, self.s)
        } else {
            (-self.s, self.s)
        }
    }

    pub fn exponent(&self) -> i32 {
        self.normalized.iter().filter(|&&b| b).count() as i32
    }

    pub fn normalization(&self) -> f64 {
        self.s.powi(self.exponent())
    }

    pub fn area(&self) -> f64 {
        let (a, b) = self.axis(0);
        let (c, d) = self.axis(1);
        (b - a) * (d - c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Combine {
    /// Sojourn of the sum field over all axes (one or two).
    Field,
    /// Sojourn of the first axis shifted by the suprema of the others.
    SupRest,
}

struct Engine {
    axes: Vec<AxisPlan>,
    combine: Combine,
}

struct EngineState<'a> {
    samplers: Vec<AxisSampler<'a>>,
    bufs: Vec<Vec<f64>>,
    field: Vec<f64>,
    scratch: Vec<f64>,
}

impl Engine {
    fn cell(&self) -> f64 {
        match self.combine {
            Combine::Field => self.axes.iter().map(|a| a.grid().step()).product(),
            Combine::SupRest => self.axes[0].grid().step(),
        }
    }

    /// Row `k`, column `j`: `e^{z_{x_j}} · weight` for sample `k`.
    fn run(&self, xs: &[f64], settings: &BermanSettings) -> SampleMatrix {
        assert!(self.combine == Combine::SupRest || self.axes.len() <= 2);
        let cell = self.cell();
        let antithetic = settings.antithetic;
        mc::run(
            &settings.mc,
            xs.len(),
            || EngineState {
                samplers: self.axes.iter().map(AxisPlan::sampler).collect(),
                bufs: self.axes.iter().map(|a| vec![0.0; a.len()]).collect(),
                field: Vec::new(),
                scratch: Vec::new(),
            },
            |st, rng, out| {
                let mut log_w = 0.0;
                for (s, b) in st.samplers.iter_mut().zip(st.bufs.iter_mut()) {
                    log_w += s.draw(rng, b, antithetic);
                }
                let (values, shift): (&[f64], f64) = match (self.combine, st.bufs.len()) {
                    (Combine::Field, 1) | (Combine::SupRest, 1) => (&st.bufs[0], 0.0),
                    (Combine::Field, _) => {
                        let (a, b) = (&st.bufs[0], &st.bufs[1]);
                        st.field.clear();
                        st.field.reserve(a.len() * b.len());
                        for &ai in a {
                            st.field.extend(b.iter().map(|&bj| ai + bj));
                        }
                        (&st.field, 0.0)
                    }
                    (Combine::SupRest, _) => (&st.bufs[0], st.bufs[1..].iter().map(|b| max_value(b)).sum()),
                };
                let levels = levels_for_sojourns(values, cell, xs, &mut st.scratch);
                for (o, l) in out.iter_mut().zip(levels) {
                    *o = match l {
                        Level::Finite(z) => (z + shift + log_w).exp(),
                        Level::NegInfinity => 0.0,
                    };
                }
            },
        )
    }

    /// Estimates per `x`; entries with `x ≥ measure` are exact zeros.
    fn estimate(
        &self,
        xs: &[f64],
        measure: f64,
        normalization: f64,
        settings: &BermanSettings,
    ) -> Vec<ConstantEstimate> {
        let live: Vec<f64> = xs.iter().copied().filter(|&x| x < measure).collect();
        let m = if live.is_empty() { None } else { Some(self.run(&live, settings)) };
        let domain = DomainDescriptor::of_axes(&self.axes);
        let grid_step = self.axes[0].grid().step();
        let mut col = 0;
        xs.iter()
            .map(|&x| {
                let (value, std_err, vanishing) = if x >= measure {
                    (0.0, 0.0, true)
                } else {
                    let (v, se) = mc::batch_mean(&m.as_ref().unwrap().column(col), settings.mc.batches);
                    col += 1;
                    (v / normalization, se / normalization, false)
                };
                ConstantEstimate {
                    x,
                    value,
                    std_err,
                    n_samples: if vanishing { 0 } else { settings.mc.n_samples },
                    grid_step,
                    domain: domain.clone(),
                    normalization,
                    seed: settings.mc.seed,
                    vanishing_by_bound: vanishing,
                }
            })
            .collect()
    }
}

fn check_xs(xs: &[f64]) -> Result<()> {
    ensure(!xs.is_empty(), "x", || "at least one sojourn length is required".into())?;
    for &x in xs {
        ensure(x.is_finite() && x >= 0.0, "x", || format!("must be finite and nonnegative, got {x}"))?;
    }
    Ok(())
}

fn interval_grid(interval: (f64, f64), n_grid: usize) -> Result<GridSpec> {
    GridSpec::new(interval.0, interval.1, n_grid)
}

/// `B_α^h(x, [a, b])` for each `x` in `xs`, sharing paths across `xs`.
pub fn estimate_berman_1d_curve(
    alpha: f64,
    drift: DriftSpec,
    xs: &[f64],
    interval: (f64, f64),
    n_grid: usize,
    settings: &BermanSettings,
) -> Result<Vec<ConstantEstimate>> {
    settings.mc.validate()?;
    check_xs(xs)?;
    let grid = interval_grid(interval, n_grid)?;
    ensure(alpha > 0.0, "alpha", || format!("must lie in (0, 2], got {alpha}"))?;
    let engine = Engine {
        axes: vec![AxisPlan::new(alpha, drift, grid, settings.mode())?],
        combine: Combine::Field,
    };
    Ok(engine.estimate(xs, grid.length(), 1.0, settings))
}

/// `B_α^h(x, [a, b])` on a grid of `n_grid` points.
pub fn estimate_berman_1d(
    alpha: f64,
    drift: DriftSpec,
    x: f64,
    interval: (f64, f64),
    n_grid: usize,
    settings: &BermanSettings,
) -> Result<ConstantEstimate> {
    Ok(estimate_berman_1d_curve(alpha, drift, &[x], interval, n_grid, settings)?.remove(0))
}

/// Result of repeating an estimate with the grid step halved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementCheck {
    pub coarse: ConstantEstimate,
    pub fine: ConstantEstimate,
    /// `|fine − coarse| < 2 · combined SE`.
    pub passed: bool,
}

/// Re-runs [`estimate_berman_1d`] at half the grid step (independent
/// seed) and checks that the estimate moves by less than two standard
/// errors.
pub fn grid_refinement_check(
    alpha: f64,
    drift: DriftSpec,
    x: f64,
    interval: (f64, f64),
    n_grid: usize,
    settings: &BermanSettings,
) -> Result<RefinementCheck> {
    let coarse = estimate_berman_1d(alpha, drift, x, interval, n_grid, settings)?;
    let fine = estimate_berman_1d(alpha, drift, x, interval, 2 * n_grid - 1, &settings.derived(0x05ee_df1e))?;
    let se = coarse.std_err.hypot(fine.std_err);
    let passed = (fine.value - coarse.value).abs() <= 2.0 * se;
    Ok(RefinementCheck { coarse, fine, passed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSettings {
    pub schedule: Vec<f64>,
    pub points_per_unit: f64,
}

impl Default for LimitSettings {
    fn default() -> Self {
        Self {
            schedule: vec![4.0, 8.0, 16.0],
            points_per_unit: 256.0,
        }
    }
}

impl LimitSettings {
    fn validate(&self) -> Result<()> {
        ensure(self.schedule.len() >= 3, "schedule", || {
            format!("need at least 3 entries, got {}", self.schedule.len())
        })?;
        ensure(self.schedule.iter().all(|&s| s > 0.0 && s.is_finite()), "schedule", || {
            "entries must be positive".into()
        })?;
        ensure(self.schedule.windows(2).all(|w| w[1] > w[0]), "schedule", || {
            "must be strictly increasing".into()
        })?;
        ensure(self.points_per_unit > 0.0, "points_per_unit", || "must be positive".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    /// Slope of the linear fit; `value` is the per-unit-length constant.
    pub estimate: ConstantEstimate,
    pub intercept: f64,
    pub intercept_se: f64,
    pub per_s: Vec<ConstantEstimate>,
    /// Some residual exceeds two standard errors: the schedule is not yet
    /// in the linear regime.
    pub curvature_flag: bool,
}

/// Weighted-free least squares `y ≈ c·s + d`, with standard errors
/// propagated from independent per-point errors.
pub(crate) struct LinearFit {
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub intercept_se: f64,
    pub residuals: Vec<f64>,
}

pub(crate) fn linear_fit(s: &[f64], y: &[f64], se: &[f64]) -> LinearFit {
    let n = s.len() as f64;
    let sm = s.iter().sum::<f64>() / n;
    let sxx: f64 = s.iter().map(|v| (v - sm).powi(2)).sum();
    let w: Vec<f64> = s.iter().map(|v| (v - sm) / sxx).collect();
    let slope: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let ym = y.iter().sum::<f64>() / n;
    let intercept = ym - slope * sm;
    let slope_var: f64 = w.iter().zip(se).map(|(w, e)| (w * e).powi(2)).sum();
    // d = Σ (1/n − s̄ w_i) y_i
    let intercept_var: f64 = w.iter().zip(se).map(|(w, e)| ((1.0 / n - sm * w) * e).powi(2)).sum();
    let residuals = s.iter().zip(y).map(|(s, y)| y - (slope * s + intercept)).collect();
    LinearFit {
        slope,
        slope_se: slope_var.sqrt(),
        intercept,
        intercept_se: intercept_var.sqrt(),
        residuals,
    }
}

/// `B_α(x) = lim B_α(x, [0, S]) / S` for each `x`, from a linear fit of
/// `B_α(x, [0, S])` in `S` over the schedule. Each `S` uses its own seed.
pub fn estimate_berman_1d_limit_curve(
    alpha: f64,
    xs: &[f64],
    limit: &LimitSettings,
    settings: &BermanSettings,
) -> Result<Vec<LimitEstimate>> {
    limit.validate()?;
    check_xs(xs)?;
    let mut tables = Vec::with_capacity(limit.schedule.len());
    for (k, &s) in limit.schedule.iter().enumerate() {
        let grid = GridSpec::with_density(0.0, s, limit.points_per_unit)?;
        tables.push(estimate_berman_1d_curve(
            alpha,
            DriftSpec::NONE,
            xs,
            (0.0, s),
            grid.n_points,
            &settings.derived(k as u64),
        )?);
    }
    Ok(xs
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let per_s: Vec<ConstantEstimate> = tables.iter().map(|t| t[j].clone()).collect();
            let y: Vec<f64> = per_s.iter().map(|e| e.value).collect();
            let se: Vec<f64> = per_s.iter().map(|e| e.std_err).collect();
            let fit = linear_fit(&limit.schedule, &y, &se);
            let curvature_flag = fit.residuals.iter().zip(&se).any(|(r, e)| r.abs() > 2.0 * e);
            LimitEstimate {
                estimate: ConstantEstimate {
                    x,
                    value: fit.slope,
                    std_err: fit.slope_se,
                    n_samples: settings.mc.n_samples * limit.schedule.len(),
                    grid_step: 1.0 / limit.points_per_unit,
                    domain: DomainDescriptor::Limit { schedule: limit.schedule.clone() },
                    normalization: 1.0,
                    seed: settings.mc.seed,
                    vanishing_by_bound: false,
                },
                intercept: fit.intercept,
                intercept_se: fit.intercept_se,
                per_s,
                curvature_flag,
            }
        })
        .collect())
}

pub fn estimate_berman_1d_limit(
    alpha: f64,
    x: f64,
    limit: &LimitSettings,
    settings: &BermanSettings,
) -> Result<LimitEstimate> {
    Ok(estimate_berman_1d_limit_curve(alpha, &[x], limit, settings)?.remove(0))
}

/// Pickands constant `H_α = B_α(0)`.
pub fn estimate_pickands(alpha: f64, limit: &LimitSettings, settings: &BermanSettings) -> Result<LimitEstimate> {
    estimate_berman_1d_limit(alpha, 0.0, limit, settings)
}

fn check_rule(alpha: f64, drift: DriftSpec, normalized: bool, axis: usize) -> Result<()> {
    let name = if axis == 0 { "rule.axis1" } else { "rule.axis2" };
    if alpha == 0.0 {
        ensure(!normalized, name, || "a pure-drift axis needs the symmetric domain [-S, S]".into())
    } else if !drift.is_zero() {
        ensure(normalized == (alpha < drift.exponent), name, || {
            format!("inconsistent with alpha = {alpha}, beta = {}", drift.exponent)
        })
    } else {
        Ok(())
    }
}

/// `B^{h1,h2}_{α1,α2}(x, G(S, ...)) / S^{#normalized axes}` for each `x`.
/// `α_i = 0` gives a deterministic axis `−h_i`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_berman_2d_curve(
    alpha1: f64,
    alpha2: f64,
    drift1: DriftSpec,
    drift2: DriftSpec,
    xs: &[f64],
    rule: &DomainRule,
    points_per_unit: f64,
    settings: &BermanSettings,
) -> Result<Vec<ConstantEstimate>> {
    settings.mc.validate()?;
    check_xs(xs)?;
    check_rule(alpha1, drift1, rule.normalized[0], 0)?;
    check_rule(alpha2, drift2, rule.normalized[1], 1)?;
    ensure(alpha1 > 0.0 || alpha2 > 0.0, "alpha", || "at least one axis must be random".into())?;
    let axis = |i: usize, alpha: f64, drift: DriftSpec| -> Result<AxisPlan> {
        let (a, b) = rule.axis(i);
        let grid = if a < 0.0 {
            symmetric_grid(b, points_per_unit)?
        } else {
            GridSpec::with_density(a, b, points_per_unit)?
        };
        AxisPlan::new(alpha, drift, grid, settings.mode())
    };
    let engine = Engine {
        axes: vec![axis(0, alpha1, drift1)?, axis(1, alpha2, drift2)?],
        combine: Combine::Field,
    };
    Ok(engine.estimate(xs, rule.area(), rule.normalization(), settings))
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_berman_2d(
    alpha1: f64,
    alpha2: f64,
    drift1: DriftSpec,
    drift2: DriftSpec,
    x: f64,
    rule: &DomainRule,
    points_per_unit: f64,
    settings: &BermanSettings,
) -> Result<ConstantEstimate> {
    Ok(estimate_berman_2d_curve(alpha1, alpha2, drift1, drift2, &[x], rule, points_per_unit, settings)?.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConstantEstimate>,
    /// Relative change between the last two rows.
    pub last_relative_change: f64,
    /// That change is within two combined standard errors.
    pub stabilized: bool,
}

/// Normalized two-dimensional estimates along an increasing schedule of
/// `S`, to check empirically that the `S → ∞` limit settles.
#[allow(clippy::too_many_arguments)]
pub fn berman_2d_convergence(
    alpha1: f64,
    alpha2: f64,
    drift1: DriftSpec,
    drift2: DriftSpec,
    x: f64,
    rule: &DomainRule,
    schedule: &[f64],
    points_per_unit: f64,
    settings: &BermanSettings,
) -> Result<ConvergenceTable> {
    ensure(schedule.len() >= 2, "schedule", || "need at least 2 entries".into())?;
    let rows = schedule
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            estimate_berman_2d(alpha1, alpha2, drift1, drift2, x, &rule.with_s(s), points_per_unit, &settings.derived(k as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let (a, b) = (&rows[rows.len() - 2], &rows[rows.len() - 1]);
    let last_relative_change = (b.value - a.value).abs() / a.value.abs().max(f64::MIN_POSITIVE);
    let stabilized = (b.value - a.value).abs() <= 2.0 * a.std_err.hypot(b.std_err);
    Ok(ConvergenceTable {
        rows,
        last_relative_change,
        stabilized,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BhatEstimate {
    /// Joint simulation, extrapolated in the rest lengths.
    pub direct: ConstantEstimate,
    /// `Π_{i≥2} H_{α_i} · B_{α_1}(x, [0, n_1])`.
    pub product: ConstantEstimate,
    pub direct_per_n: Vec<ConstantEstimate>,
    pub pickands: Vec<LimitEstimate>,
    pub first_axis: ConstantEstimate,
}

/// Mixed sojourn/supremum constant: `t_1` sojourn of
/// `W_{α1}(t_1) + Σ_{i≥2} sup_{[0, n]} W_{α_i}` on `[0, n1]`, divided by
/// `n^{m−1}` and extrapolated linearly in `1/n`; compared against the
/// product of Pickands constants and the one-dimensional constant.
pub fn estimate_bhat(
    alphas: &[f64],
    x: f64,
    n1: f64,
    n_rest_schedule: &[f64],
    points_per_unit: f64,
    settings: &BermanSettings,
) -> Result<BhatEstimate> {
    settings.mc.validate()?;
    ensure(!alphas.is_empty(), "alphas", || "need at least one exponent".into())?;
    ensure(x >= 0.0 && x < n1, "x", || format!("need 0 <= x < n1 = {n1}, got {x}"))?;
    let grid1 = GridSpec::with_density(0.0, n1, points_per_unit)?;
    let first_axis = estimate_berman_1d(alphas[0], DriftSpec::NONE, x, (0.0, n1), grid1.n_points, &settings.derived(1000))?;
    if alphas.len() == 1 {
        return Ok(BhatEstimate {
            direct: first_axis.clone(),
            product: first_axis.clone(),
            direct_per_n: vec![first_axis.clone()],
            pickands: Vec::new(),
            first_axis,
        });
    }
    let limit = LimitSettings {
        schedule: n_rest_schedule.to_vec(),
        points_per_unit,
    };
    limit.validate()?;
    let rest = (alphas.len() - 1) as i32;
    let mut direct_per_n = Vec::with_capacity(n_rest_schedule.len());
    for (k, &n) in n_rest_schedule.iter().enumerate() {
        let mut axes = vec![AxisPlan::new(alphas[0], DriftSpec::NONE, grid1, settings.mode())?];
        for &a in &alphas[1..] {
            axes.push(AxisPlan::new(a, DriftSpec::NONE, GridSpec::with_density(0.0, n, points_per_unit)?, settings.mode())?);
        }
        let engine = Engine {
            axes,
            combine: Combine::SupRest,
        };
        direct_per_n.push(engine.estimate(&[x], n1, n.powi(rest), &settings.derived(2000 + k as u64)).remove(0));
    }
    let inv: Vec<f64> = n_rest_schedule.iter().map(|n| 1.0 / n).collect();
    let y: Vec<f64> = direct_per_n.iter().map(|e| e.value).collect();
    let se: Vec<f64> = direct_per_n.iter().map(|e| e.std_err).collect();
    let fit = linear_fit(&inv, &y, &se);
    let direct = ConstantEstimate {
        value: fit.intercept,
        std_err: fit.intercept_se,
        n_samples: settings.mc.n_samples * n_rest_schedule.len(),
        domain: DomainDescriptor::Limit {
            schedule: n_rest_schedule.to_vec(),
        },
        normalization: 1.0,
        ..first_axis.clone()
    };
    let pickands = alphas[1..]
        .iter()
        .enumerate()
        .map(|(i, &a)| estimate_pickands(a, &limit, &settings.derived(3000 + i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut value = first_axis.value;
    let mut rel_var = (first_axis.std_err / first_axis.value).powi(2);
    for h in &pickands {
        value *= h.estimate.value;
        rel_var += (h.estimate.std_err / h.estimate.value).powi(2);
    }
    let product = ConstantEstimate {
        value,
        std_err: value.abs() * rel_var.sqrt(),
        ..direct.clone()
    };
    Ok(BhatEstimate {
        direct,
        product,
        direct_per_n,
        pickands,
        first_axis,
    })
}

/// One axis of a target-curve representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AxisDomain {
    /// Driftless axis over the whole line, truncated at `±half_width`;
    /// yields the per-unit-length constant on that axis.
    WholeLine { half_width: f64 },
    /// Finite interval with the configured estimator.
    Interval { start: f64, end: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSetup {
    pub alpha: f64,
    pub drift: DriftSpec,
    pub domain: AxisDomain,
    pub points_per_unit: f64,
}

impl AxisSetup {
    /// Default truncation `L = 25^{1/α}`, where the trend `|t|^α` has
    /// reached 25.
    pub fn whole_line(alpha: f64, points_per_unit: f64) -> Self {
        Self {
            alpha,
            drift: DriftSpec::NONE,
            domain: AxisDomain::WholeLine {
                half_width: default_half_width(alpha),
            },
            points_per_unit,
        }
    }

    fn plan(&self, settings: &BermanSettings) -> Result<AxisPlan> {
        match self.domain {
            AxisDomain::WholeLine { half_width } => {
                AxisPlan::new(self.alpha, self.drift, symmetric_grid(half_width, self.points_per_unit)?, AxisMode::WholeLine)
            }
            AxisDomain::Interval { start, end } => {
                let grid = if start < 0.0 && end > 0.0 && (start + end).abs() < 1e-12 {
                    symmetric_grid(end, self.points_per_unit)?
                } else {
                    GridSpec::with_density(start, end, self.points_per_unit)?
                };
                AxisPlan::new(self.alpha, self.drift, grid, settings.mode())
            }
        }
    }
}

pub fn default_half_width(alpha: f64) -> f64 {
    25f64.powf(1.0 / alpha)
}

/// Per-unit constants over whole lines / product domains, and the ratio
/// curve `B(x) / B(0)` from the same paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCurve {
    pub xs: Vec<f64>,
    pub ratio: Vec<f64>,
    pub ratio_se: Vec<f64>,
    pub constants: Vec<ConstantEstimate>,
}

/// `B(x) / B(0)` for a one- or two-axis setup. Whole-line axes carry the
/// `∫ e^{W}` normalization, so the constants are per unit length along
/// them; interval axes are left unnormalized. Nonincreasing in `x` and
/// equal to 1 at `x = 0`, sample by sample.
pub fn berman_ratio_curve(axes: &[AxisSetup], xs: &[f64], settings: &BermanSettings) -> Result<RatioCurve> {
    settings.mc.validate()?;
    check_xs(xs)?;
    ensure(matches!(axes.len(), 1 | 2), "axes", || format!("need 1 or 2 axes, got {}", axes.len()))?;
    ensure(axes.iter().any(|a| a.alpha > 0.0), "alpha", || "at least one axis must be random".into())?;
    let plans = axes.iter().map(|a| a.plan(settings)).collect::<Result<Vec<_>>>()?;
    let measure: f64 = axes
        .iter()
        .map(|a| match a.domain {
            AxisDomain::WholeLine { .. } => f64::INFINITY,
            AxisDomain::Interval { start, end } => end - start,
        })
        .product();
    let engine = Engine {
        axes: plans,
        combine: Combine::Field,
    };
    let mut all = vec![0.0];
    all.extend_from_slice(xs);
    let live: Vec<f64> = all.iter().copied().filter(|&x| x < measure).collect();
    let m = engine.run(&live, settings);
    let base = m.column(0);
    let batches = settings.mc.batches;
    let domain = match axes {
        [a] if matches!(a.domain, AxisDomain::WholeLine { .. }) => DomainDescriptor::WholeLine {
            half_widths: vec![engine.axes[0].grid().end],
        },
        _ => DomainDescriptor::of_axes(&engine.axes),
    };
    let mut ratio = Vec::with_capacity(xs.len());
    let mut ratio_se = Vec::with_capacity(xs.len());
    let mut constants = Vec::with_capacity(xs.len());
    let mut next = 1;
    for &x in xs {
        let (value, se, r, rse, vanishing) = if x >= measure {
            (0.0, 0.0, 0.0, 0.0, true)
        } else {
            let col = m.column(next);
            next += 1;
            let (v, se) = mc::batch_mean(&col, batches);
            let (r, rse) = if x == 0.0 { (1.0, 0.0) } else { mc::batch_ratio(&col, &base, batches) };
            (v, se, r, rse, false)
        };
        ratio.push(r);
        ratio_se.push(rse);
        constants.push(ConstantEstimate {
            x,
            value,
            std_err: se,
            n_samples: settings.mc.n_samples,
            grid_step: engine.axes[0].grid().step(),
            domain: domain.clone(),
            normalization: 1.0,
            seed: settings.mc.seed,
            vanishing_by_bound: vanishing,
        });
    }
    Ok(RatioCurve {
        xs: xs.to_vec(),
        ratio,
        ratio_se,
        constants,
    })
}

/// `B_α(x)` for each `x` through the whole-line representation.
pub fn estimate_berman_1d_whole_line(
    alpha: f64,
    xs: &[f64],
    half_width: Option<f64>,
    points_per_unit: f64,
    settings: &BermanSettings,
) -> Result<RatioCurve> {
    let mut axis = AxisSetup::whole_line(alpha, points_per_unit);
    if let Some(l) = half_width {
        axis.domain = AxisDomain::WholeLine { half_width: l };
    }
    berman_ratio_curve(&[axis], xs, settings)
}
