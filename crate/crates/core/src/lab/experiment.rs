//! Empirical `P(Vol{X > u} > v(u) x | sup X > u)` by crude conditioning,
//! next to the Berman-constant ratio it should approach as `u → ∞`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{onepoint_axis, scaling_function, QueueAsymptotics, ScalingFamily};
use crate::berman::{berman_ratio_curve, AxisDomain, AxisSetup, BermanSettings, Estimator, RatioCurve};
use crate::error::{ensure, Result};
use crate::gauss::{DriftSpec, ExpField, ProcessPlan, ProcessSpec};
use crate::grid::{Domain, GridSpec, Lattice2D};
use crate::mc::run_chunks;
use crate::rng::derive_seed;

/// Label of the seed stream (derived from the experiment seed) used for target curves.
pub const TARGET_STREAM: u64 = 0x007a_59e7;
pub const MIN_CONDITIONED: usize = 500;

/// How the queue observation window grows with `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QueueRegime {
    /// Window `T v(u)`; target `B_α(x, [0, T]) / B_α(0, [0, T])`.
    Finite { t: f64 },
    /// Window `M v(u)` with `M` large, standing in for windows that grow
    /// faster than `v(u)`; target `B_α(x) / B_α(0)`.
    Long { multiple: f64 },
}

/// How the simulation grid relates to the level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridScaling {
    /// One grid with `points_per_unit` in original time for all levels.
    Fixed,
    /// Per-level grids with `points_per_unit` in rescaled time (original
    /// density `points_per_unit / v(u)`); the target uses the same density.
    /// One-dimensional families only.
    Local { points_per_unit: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TargetConfig {
    pub n_samples: usize,
    /// Grid density per unit of local (rescaled) time.
    pub points_per_unit: f64,
    /// Half-width of `[−S, S]` on drift axes; `None` picks the point where
    /// the drift reaches 25.
    pub drift_half_width: Option<f64>,
    pub estimator: Estimator,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            n_samples: 20_000,
            points_per_unit: 32.0,
            drift_half_width: None,
            estimator: Estimator::Tilted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: ScalingFamily,
    pub levels: Vec<f64>,
    /// Sojourn lengths in units of `v(u)`.
    pub xs: Vec<f64>,
    /// Side `T` of the parameter set: `[0, T]`, `[0, T]²`, or `[−T, T]²`
    /// for the single-maximum field. Unused for the queue.
    pub horizon: f64,
    pub points_per_unit: f64,
    pub n_target_conditioned: usize,
    pub max_replicates: usize,
    pub round_replicates: usize,
    pub chunk_size: usize,
    pub seed: u64,
    pub workers: usize,
    pub queue_regime: QueueRegime,
    pub queue_horizon_mult: f64,
    pub target: TargetConfig,
    pub grid_scaling: GridScaling,
}

impl ExperimentConfig {
    pub fn new(family: ScalingFamily, levels: Vec<f64>, xs: Vec<f64>, seed: u64) -> Self {
        Self {
            family,
            levels,
            xs,
            horizon: 1.0,
            points_per_unit: 1024.0,
            n_target_conditioned: 2000,
            max_replicates: 2_000_000,
            round_replicates: 16_384,
            chunk_size: 1024,
            seed,
            workers: 0,
            queue_regime: QueueRegime::Finite { t: 4.0 },
            queue_horizon_mult: 5.0,
            target: TargetConfig::default(),
            grid_scaling: GridScaling::Fixed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        ensure(!self.levels.is_empty(), "levels", || "need at least one level".into())?;
        ensure(self.levels.iter().all(|&u| u > 0.0 && u.is_finite()), "levels", || "levels must be positive".into())?;
        ensure(!self.xs.is_empty(), "xs", || "need at least one x".into())?;
        ensure(self.xs.iter().all(|&x| x >= 0.0 && x.is_finite()), "xs", || "x must be nonnegative".into())?;
        ensure(self.xs.windows(2).all(|w| w[1] > w[0]), "xs", || "x grid must be increasing".into())?;
        ensure(self.horizon > 0.0, "horizon", || "must be positive".into())?;
        ensure(self.points_per_unit > 0.0, "points_per_unit", || "must be positive".into())?;
        ensure(self.chunk_size >= 1, "chunk_size", || "must be >= 1".into())?;
        ensure(
            self.round_replicates >= self.chunk_size && self.round_replicates.is_multiple_of(self.chunk_size),
            "round_replicates",
            || "must be a positive multiple of chunk_size".into(),
        )?;
        ensure(self.max_replicates >= self.round_replicates, "max_replicates", || {
            "must cover at least one round".into()
        })?;
        ensure(self.target.n_samples >= 100, "target.n_samples", || "need at least 100".into())?;
        if let GridScaling::Local { points_per_unit } = self.grid_scaling {
            ensure(points_per_unit > 0.0, "grid_scaling.points_per_unit", || "must be positive".into())?;
            ensure(!self.family.is_planar(), "grid_scaling", || {
                "local grid matching needs a one-dimensional family".into()
            })?;
        }
        match self.queue_regime {
            QueueRegime::Finite { t } => ensure(t > 0.0, "queue_regime.t", || "must be positive".into())?,
            QueueRegime::Long { multiple } => {
                ensure(multiple > 0.0, "queue_regime.multiple", || "must be positive".into())?
            }
        }
        Ok(())
    }
}

/// Conditional curve at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub family: ScalingFamily,
    pub u: f64,
    pub v_u: f64,
    pub x_grid: Vec<f64>,
    pub ratio_hat: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    pub ci_halfwidth: Vec<f64>,
    pub n_conditioned: usize,
    pub n_replicates: usize,
    /// Empirical `P(sup > u)`.
    pub p_sup: f64,
    pub target: Vec<f64>,
    pub target_se: Vec<f64>,
    pub sup_distance: f64,
    pub low_confidence: bool,
    /// `x` values dropped because the limit is undefined there.
    pub excluded_xs: Vec<f64>,
    pub notes: Vec<String>,
    /// Seed of the random streams this level was drawn from.
    pub seed: u64,
    pub grid_step: f64,
    pub rounds: usize,
    pub chunk_ids: std::ops::Range<u64>,
    pub runtime_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderResult {
    pub levels: Vec<ExperimentResult>,
    pub target: RatioCurve,
    /// `sup_distance` does not increase from one level to the next.
    pub sup_distance_nonincreasing: bool,
    /// Largest number of rounds any run needed.
    pub rounds: usize,
    pub chunk_ids: std::ops::Range<u64>,
    pub runtime_secs: f64,
}

/// Wilson score interval for `k` successes out of `n` at `z = 1.96`.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = k as f64 / nf;
    let d = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / d;
    let half = z * ((p * (1.0 - p) + z * z / (4.0 * nf)) / nf).sqrt() / d;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

struct Setup {
    spec: ProcessSpec,
    domain: Domain,
    cell: f64,
    /// Per level: number of leading grid values that form the window.
    prefix: Vec<usize>,
    /// Per level: window measure.
    window: Vec<f64>,
}

fn setup(cfg: &ExperimentConfig, levels: &[f64], v: &[f64], ppu: f64) -> Result<Setup> {
    let t = cfg.horizon;
    let line = |a: f64, b: f64| GridSpec::with_density(a, b, ppu);
    let (spec, domain) = match cfg.family {
        ScalingFamily::Stationary1D { a, alpha } => {
            (ProcessSpec::StationaryExp1D { a, alpha }, Domain::Line(line(0.0, t)?))
        }
        ScalingFamily::Chi { m, a, alpha } => (ProcessSpec::Chi { m, a, alpha }, Domain::Line(line(0.0, t)?)),
        ScalingFamily::Stationary2D { a1, a2, alpha1, alpha2 } => (
            ProcessSpec::StationaryExp2D { a1, a2, alpha1, alpha2 },
            Domain::Plane(Lattice2D::new(line(0.0, t)?, line(0.0, t)?)),
        ),
        ScalingFamily::OnePoint2D { a, alpha, b, beta } => (
            ProcessSpec::ScaledVariance2D {
                base: ExpField { a1: a[0], a2: a[1], alpha1: alpha[0], alpha2: alpha[1] },
                b1: b[0],
                b2: b[1],
                beta1: beta[0],
                beta2: beta[1],
                t_star: (0.0, 0.0),
            },
            Domain::Plane(Lattice2D::new(line(-t, t)?, line(-t, t)?)),
        ),
        ScalingFamily::Queue { alpha, c } => {
            let longest = v.iter().cloned().fold(0.0, f64::max) * queue_multiple(cfg);
            let level_ref = levels.iter().cloned().fold(0.0, f64::max);
            (
                ProcessSpec::Queue { alpha, c, horizon_mult: cfg.queue_horizon_mult, level_ref },
                Domain::Line(line(0.0, longest)?),
            )
        }
    };
    let (cell, measure, n) = match domain {
        Domain::Line(g) => (g.step(), g.length(), g.n_points),
        Domain::Plane(l) => (l.cell_area(), l.area(), l.axis1.n_points * l.axis2.n_points),
    };
    let (prefix, window) = match (cfg.family, domain) {
        (ScalingFamily::Queue { .. }, Domain::Line(g)) => v
            .iter()
            .map(|&vu| {
                let k = g.nearest_index(vu * queue_multiple(cfg));
                (k + 1, k as f64 * g.step())
            })
            .unzip(),
        _ => (vec![n; v.len()], vec![measure; v.len()]),
    };
    Ok(Setup { spec, domain, cell, prefix, window })
}

fn queue_multiple(cfg: &ExperimentConfig) -> f64 {
    match cfg.queue_regime {
        QueueRegime::Finite { t } => t,
        QueueRegime::Long { multiple } => multiple,
    }
}

/// Replicates of one group of levels that share paths.
struct LevelRun {
    /// Per level: sojourns in units of `v(u)` of the paths that exceeded `u`.
    vols: Vec<Vec<f64>>,
    n_replicates: usize,
    window: Vec<f64>,
    grid_step: f64,
    rounds: usize,
    seed: u64,
}

/// Draws rounds of replicates on one grid until every level in `levels`
/// has `n_target_conditioned` exceedances (or `max_replicates` is spent).
fn run_levels(cfg: &ExperimentConfig, levels: &[f64], v: &[f64], ppu: f64, seed: u64) -> Result<LevelRun> {
    let st = setup(cfg, levels, v, ppu)?;
    let plan = ProcessPlan::new(st.spec, st.domain)?;
    let width = levels.len();
    let chunks_per_round = (cfg.round_replicates / cfg.chunk_size) as u64;
    let max_rounds = cfg.max_replicates.div_ceil(cfg.round_replicates);
    let mut vols = vec![Vec::new(); width];
    let mut n_replicates = 0;
    let mut rounds = 0;
    while rounds < max_rounds {
        let ids = rounds as u64 * chunks_per_round..(rounds as u64 + 1) * chunks_per_round;
        let m = run_chunks(
            seed,
            cfg.workers,
            width,
            ids,
            |_| cfg.chunk_size,
            || (plan.sampler(), vec![0.0; plan.len()]),
            |(sampler, buf), rng, out| {
                sampler.fill(rng, buf);
                for (l, &u) in levels.iter().enumerate() {
                    let count = buf[..st.prefix[l]].iter().filter(|&&w| w > u).count();
                    // −1 marks "no exceedance"; otherwise the sojourn in units of v(u)
                    out[l] = if count == 0 { -1.0 } else { count as f64 * st.cell / v[l] };
                }
            },
        );
        for row in m.data.chunks(width) {
            for (vl, &val) in vols.iter_mut().zip(row) {
                if val >= 0.0 {
                    vl.push(val);
                }
            }
        }
        n_replicates += m.rows();
        rounds += 1;
        if vols.iter().all(|vl| vl.len() >= cfg.n_target_conditioned) {
            break;
        }
    }
    let grid_step = match st.domain {
        Domain::Line(g) => g.step(),
        Domain::Plane(l) => l.axis1.step(),
    };
    Ok(LevelRun { vols, n_replicates, window: st.window, grid_step, rounds, seed })
}

fn target_axes(cfg: &ExperimentConfig, ppu: f64) -> Result<Vec<AxisSetup>> {
    let whole = |alpha: f64| AxisSetup::whole_line(alpha, ppu);
    Ok(match cfg.family {
        ScalingFamily::Stationary1D { alpha, .. } | ScalingFamily::Chi { alpha, .. } => vec![whole(alpha)],
        ScalingFamily::Stationary2D { alpha1, alpha2, .. } => vec![whole(alpha1), whole(alpha2)],
        ScalingFamily::Queue { alpha, .. } => match cfg.queue_regime {
            QueueRegime::Finite { t } => vec![AxisSetup {
                alpha,
                drift: DriftSpec::NONE,
                domain: AxisDomain::Interval { start: 0.0, end: t },
                points_per_unit: ppu,
            }],
            QueueRegime::Long { .. } => vec![whole(alpha)],
        },
        ScalingFamily::OnePoint2D { a, alpha, b, beta } => (0..2)
            .map(|i| {
                let ax = onepoint_axis(a[i], alpha[i], b[i], beta[i])?;
                if ax.normalized {
                    return Ok(whole(ax.alpha_hat));
                }
                let s = cfg
                    .target
                    .drift_half_width
                    .unwrap_or_else(|| (25.0 / ax.drift.coefficient).powf(1.0 / ax.drift.exponent));
                Ok(AxisSetup {
                    alpha: ax.alpha_hat,
                    drift: ax.drift,
                    domain: AxisDomain::Interval { start: -s, end: s },
                    points_per_unit: ppu,
                })
            })
            .collect::<Result<Vec<_>>>()?,
    })
}

/// Runs the conditional experiment at every level of `cfg.levels`.
///
/// With [`GridScaling::Fixed`] all levels share one set of replicates on one
/// grid, stopping after the first round in which every level has
/// `n_target_conditioned` exceedances (or at `max_replicates`). With
/// [`GridScaling::Local`] each level runs on its own grid (and its own
/// derived seed) so that the step in rescaled time is the same at every
/// level and equals the target's; the trend across levels then reflects
/// convergence in `u` alone rather than a grid that coarsens as `u` grows.
pub fn conditional_sojourn_ladder(cfg: &ExperimentConfig) -> Result<LadderResult> {
    cfg.validate()?;
    let start = Instant::now();
    let v: Vec<f64> = cfg.levels.iter().map(|&u| scaling_function(&cfg.family, u)).collect::<Result<_>>()?;
    let levels = cfg.levels.clone();
    let width = levels.len();

    // (run, index of the level within the run) per level
    let mut runs = Vec::new();
    let mut slot = Vec::with_capacity(width);
    let target_ppu = match cfg.grid_scaling {
        GridScaling::Fixed => {
            runs.push(run_levels(cfg, &levels, &v, cfg.points_per_unit, cfg.seed)?);
            slot.extend((0..width).map(|l| (0, l)));
            cfg.target.points_per_unit
        }
        GridScaling::Local { points_per_unit } => {
            for l in 0..width {
                let seed = derive_seed(cfg.seed, l as u64);
                runs.push(run_levels(cfg, &levels[l..=l], &v[l..=l], points_per_unit / v[l], seed)?);
                slot.push((l, 0));
            }
            points_per_unit
        }
    };
    let chunks_per_round = (cfg.round_replicates / cfg.chunk_size) as u64;
    let rounds = runs.iter().map(|r| r.rounds).max().unwrap_or(0);

    let target_settings = BermanSettings::new(cfg.target.n_samples, derive_seed(cfg.seed, TARGET_STREAM))
        .with_estimator(cfg.target.estimator)
        .with_workers(cfg.workers);
    let target = berman_ratio_curve(&target_axes(cfg, target_ppu)?, &cfg.xs, &target_settings)?;

    let mut results = Vec::with_capacity(width);
    for (l, &u) in levels.iter().enumerate() {
        let (r, i) = slot[l];
        let run = &runs[r];
        let grid_step = run.grid_step;
        let n_rep = run.n_replicates;
        let vols = &run.vols[i];
        let n_cond = vols.len();
        let mut notes = Vec::new();
        let bound = run.window[i] / v[l];
        let mut keep = Vec::new();
        let mut excluded = Vec::new();
        for (j, &x) in cfg.xs.iter().enumerate() {
            let too_close = match (cfg.family, cfg.queue_regime) {
                (ScalingFamily::Queue { .. }, QueueRegime::Finite { t }) => x >= t - grid_step / v[l],
                _ => false,
            };
            if too_close {
                excluded.push(x);
            } else {
                keep.push(j);
            }
        }
        if !excluded.is_empty() {
            notes.push(format!(
                "x >= T - one grid step excluded: the conditional limit does not exist at x = T ({} values)",
                excluded.len()
            ));
        }
        let mut ratio_hat = Vec::new();
        let (mut ci_lo, mut ci_hi, mut ci_half) = (Vec::new(), Vec::new(), Vec::new());
        let (mut tgt, mut tgt_se, mut x_grid) = (Vec::new(), Vec::new(), Vec::new());
        let mut sup_distance: f64 = 0.0;
        for &j in &keep {
            let x = cfg.xs[j];
            let k = if x >= bound { 0 } else { vols.iter().filter(|&&s| s > x).count() };
            let r = if n_cond == 0 { f64::NAN } else { k as f64 / n_cond as f64 };
            let (lo, hi) = wilson_interval(k, n_cond);
            x_grid.push(x);
            ratio_hat.push(r);
            ci_lo.push(lo);
            ci_hi.push(hi);
            ci_half.push(0.5 * (hi - lo));
            tgt.push(target.ratio[j]);
            tgt_se.push(target.ratio_se[j]);
            sup_distance = sup_distance.max((r - target.ratio[j]).abs());
        }
        let p_sup = n_cond as f64 / n_rep as f64;
        let low_confidence = n_cond < MIN_CONDITIONED;
        if low_confidence {
            notes.push(format!("only {n_cond} conditioned replicates (< {MIN_CONDITIONED})"));
        }
        if !(1e-4..=1e-1).contains(&p_sup) {
            notes.push(format!("P(sup > u) = {p_sup:.3e} lies outside [1e-4, 1e-1]"));
        }
        if let ScalingFamily::OnePoint2D { alpha, beta, .. } = cfg.family {
            if (0..2).any(|i| alpha[i] > beta[i]) {
                notes.push("an axis has alpha > beta: its target is a pure-drift axis".into());
            }
        }
        if let ScalingFamily::Queue { alpha, c } = cfg.family {
            let q = QueueAsymptotics::new(alpha, c, u)?;
            notes.push(format!("queue window {:.6} = {:.3} v(u), tau* = {:.4}", run.window[i], run.window[i] / q.v_u, q.tau_star));
        }
        results.push(ExperimentResult {
            family: cfg.family,
            u,
            v_u: v[l],
            x_grid,
            ratio_hat,
            ci_lo,
            ci_hi,
            ci_halfwidth: ci_half,
            n_conditioned: n_cond,
            n_replicates: n_rep,
            p_sup,
            target: tgt,
            target_se: tgt_se,
            sup_distance,
            low_confidence,
            excluded_xs: excluded,
            notes,
            seed: run.seed,
            grid_step,
            rounds: run.rounds,
            chunk_ids: 0..run.rounds as u64 * chunks_per_round,
            runtime_secs: 0.0,
        });
    }
    let runtime = start.elapsed().as_secs_f64();
    for r in &mut results {
        r.runtime_secs = runtime;
    }
    let sup_distance_nonincreasing = results.windows(2).all(|w| w[1].sup_distance <= w[0].sup_distance);
    Ok(LadderResult {
        levels: results,
        target,
        sup_distance_nonincreasing,
        rounds,
        chunk_ids: 0..rounds as u64 * chunks_per_round,
        runtime_secs: runtime,
    })
}

/// Single-level version of [`conditional_sojourn_ladder`].
pub fn conditional_sojourn_cdf(cfg: &ExperimentConfig, u: f64) -> Result<ExperimentResult> {
    let mut c = cfg.clone();
    c.levels = vec![u];
    Ok(conditional_sojourn_ladder(&c)?.levels.remove(0))
}
