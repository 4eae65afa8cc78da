//! One coordinate of the `W` field, sampled in one of three ways.
//!
//! * `Crude`: `W(t) = √2 B(t) − |t|^α − h(t)`, weight 1.
//! * `Tilted`: draw a node `s` with probability `p ∝ e^{−h}`, sample
//!   `V(t) = √2 B(t) + |s|^α − |t−s|^α` and return `V − h` with weight
//!   `1 / Σ_j p_j e^{V(t_j)}`. Any functional `F(W)` then has the same mean
//!   as under `Crude`, but `e^{z_x}` no longer has an exponentially large
//!   second moment on long intervals.
//! * `WholeLine`: `W(t) = √2 B(t) − |t|^α` on a symmetric grid, weight
//!   `1 / (Δ Σ_j e^{W(t_j)})`. The mean of `e^{z_x} · weight` is the
//!   per-unit-length constant itself (up to truncation of the line).
//!
//! `α = 0` gives a deterministic axis carrying only `−h`.

use rand::Rng;

use crate::error::{ensure, invalid, Result};
use crate::gauss::fbm::{check_alpha, FbmPlan, FbmSampler};
use crate::gauss::DriftSpec;
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum AxisMode {
    Crude,
    Tilted,
    WholeLine,
}

#[derive(Debug, Clone)]
pub(crate) struct AxisPlan {
    alpha: f64,
    mode: AxisMode,
    grid: GridSpec,
    drift: Vec<f64>,
    trend: Vec<f64>,
    lag_pow: Vec<f64>,
    fbm: Option<FbmPlan>,
    offset: usize,
    log_p: Vec<f64>,
    cum_p: Vec<f64>,
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + it.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Grid with the same step as `grid` that also reaches `0`, and the index
/// of `grid.start` inside it.
fn extend_to_origin(grid: &GridSpec) -> Result<(GridSpec, usize)> {
    if grid.index_of(0.0).is_some() {
        return Ok((*grid, 0));
    }
    let step = grid.step();
    let lift = |t: f64| {
        let k = t.abs() / step;
        ensure((k - k.round()).abs() < 1e-6, "grid", || {
            format!("0 must lie on the extension of the grid; {t} is not a multiple of the step {step}")
        })
        .map(|_| k.round() as usize)
    };
    if grid.start > 0.0 {
        let k = lift(grid.start)?;
        Ok((GridSpec::new(0.0, grid.end, grid.n_points + k)?, k))
    } else if grid.end < 0.0 {
        let k = lift(grid.end)?;
        Ok((GridSpec::new(grid.start, 0.0, grid.n_points + k)?, 0))
    } else {
        Err(invalid("grid", "0 lies inside the grid but not on a node"))
    }
}

impl AxisPlan {
    pub(crate) fn new(alpha: f64, drift: DriftSpec, grid: GridSpec, mode: AxisMode) -> Result<Self> {
        drift.validate()?;
        if alpha != 0.0 {
            check_alpha(alpha)?;
        }
        if mode == AxisMode::WholeLine {
            ensure(drift.is_zero(), "drift", || "whole-line axes carry no drift".into())?;
            ensure(alpha > 0.0, "alpha", || "whole-line axes need alpha > 0".into())?;
        }
        let points = grid.points();
        let n = points.len();
        let drift_v: Vec<f64> = points.iter().map(|&t| drift.eval(t)).collect();
        if alpha == 0.0 {
            return Ok(Self {
                alpha,
                mode,
                grid,
                drift: drift_v,
                trend: Vec::new(),
                lag_pow: Vec::new(),
                fbm: None,
                offset: 0,
                log_p: Vec::new(),
                cum_p: Vec::new(),
            });
        }
        let trend = points.iter().map(|t| t.abs().powf(alpha)).collect();
        let step = grid.step();
        let lag_pow = (0..n).map(|k| (k as f64 * step).powf(alpha)).collect();
        let (ext, offset) = extend_to_origin(&grid)?;
        let fbm = FbmPlan::pinned_at_origin(alpha, ext)?;
        let (log_p, cum_p) = if mode == AxisMode::Tilted {
            let lz = log_sum_exp(drift_v.iter().map(|h| -h));
            let log_p: Vec<f64> = drift_v.iter().map(|h| -h - lz).collect();
            let mut acc = 0.0;
            let cum_p = log_p
                .iter()
                .map(|lp| {
                    acc += lp.exp();
                    acc
                })
                .collect();
            (log_p, cum_p)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Self {
            alpha,
            mode,
            grid,
            drift: drift_v,
            trend,
            lag_pow,
            fbm: Some(fbm),
            offset,
            log_p,
            cum_p,
        })
    }

    pub(crate) fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub(crate) fn len(&self) -> usize {
        self.grid.n_points
    }

    pub(crate) fn sampler(&self) -> AxisSampler<'_> {
        let fbm = self.fbm.as_ref().map(|p| p.sampler());
        let ext = fbm.as_ref().map_or(0, FbmSampler::len);
        AxisSampler {
            plan: self,
            fbm,
            ext: vec![0.0; ext],
            antithetic_pending: false,
        }
    }
}

pub(crate) struct AxisSampler<'a> {
    plan: &'a AxisPlan,
    fbm: Option<FbmSampler>,
    ext: Vec<f64>,
    antithetic_pending: bool,
}

impl AxisSampler<'_> {
    /// Writes one realization into `out` and returns its log-weight.
    /// With `antithetic`, every second call reuses the previous Gaussian
    /// path with its sign flipped.
    pub(crate) fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64], antithetic: bool) -> f64 {
        let p = self.plan;
        let n = p.len();
        debug_assert_eq!(out.len(), n);
        let Some(fbm) = self.fbm.as_mut() else {
            for (o, h) in out.iter_mut().zip(&p.drift) {
                *o = -h;
            }
            return 0.0;
        };
        let s = if p.mode == AxisMode::Tilted {
            let u: f64 = rng.random();
            p.cum_p.partition_point(|&c| c < u).min(n - 1)
        } else {
            0
        };
        if antithetic && self.antithetic_pending {
            self.ext.iter_mut().for_each(|v| *v = -*v);
            self.antithetic_pending = false;
        } else {
            fbm.fill(rng, &mut self.ext);
            self.antithetic_pending = antithetic;
        }
        let b = &self.ext[p.offset..p.offset + n];
        let r2 = std::f64::consts::SQRT_2;
        match p.mode {
            AxisMode::Crude => {
                for i in 0..n {
                    out[i] = r2 * b[i] - p.trend[i] - p.drift[i];
                }
                0.0
            }
            AxisMode::Tilted => {
                let ts = p.trend[s];
                for i in 0..n {
                    out[i] = r2 * b[i] + ts - p.lag_pow[i.abs_diff(s)];
                }
                let log_den = log_sum_exp((0..n).map(|i| p.log_p[i] + out[i]));
                for i in 0..n {
                    out[i] -= p.drift[i];
                }
                -log_den
            }
            AxisMode::WholeLine => {
                for i in 0..n {
                    out[i] = r2 * b[i] - p.trend[i];
                }
                -(p.grid.step().ln() + log_sum_exp(out.iter().copied()))
            }
        }
    }

    #[allow(dead_code)]
    pub(crate) fn alpha(&self) -> f64 {
        self.plan.alpha
    }
}

/// Symmetric grid on `[−half_width, half_width]` with `0` as a node and
/// roughly `points_per_unit` nodes per unit length.
pub(crate) fn symmetric_grid(half_width: f64, points_per_unit: f64) -> Result<GridSpec> {
    ensure(half_width > 0.0, "half_width", || format!("must be positive, got {half_width}"))?;
    let k = (half_width * points_per_unit).round().max(1.0) as usize;
    GridSpec::new(-half_width, half_width, 2 * k + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn extension_reaches_origin() {
        let g = GridSpec::new(1.0, 2.0, 5).unwrap();
        let (e, off) = extend_to_origin(&g).unwrap();
        assert_eq!((e.start, e.n_points, off), (0.0, 9, 4));
        let g = GridSpec::new(0.3, 1.0, 5).unwrap();
        assert!(extend_to_origin(&g).is_err());
    }

    #[test]
    fn degenerate_axis_is_pure_drift() {
        let g = GridSpec::new(-1.0, 1.0, 5).unwrap();
        let plan = AxisPlan::new(0.0, DriftSpec::new(2.0, 1.0).unwrap(), g, AxisMode::Tilted).unwrap();
        let mut s = plan.sampler();
        let mut out = vec![0.0; 5];
        let lw = s.draw(&mut stream(0, 0), &mut out, false);
        assert_eq!(lw, 0.0);
        assert_eq!(out, vec![-2.0, -1.0, 0.0, -1.0, -2.0]);
    }

    #[test]
    fn tilted_path_is_zero_at_origin_only_in_crude_mode() {
        let g = GridSpec::new(0.0, 2.0, 65).unwrap();
        let crude = AxisPlan::new(1.0, DriftSpec::NONE, g, AxisMode::Crude).unwrap();
        let mut out = vec![0.0; 65];
        crude.sampler().draw(&mut stream(3, 0), &mut out, false);
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn whole_line_weight_normalizes() {
        let g = symmetric_grid(4.0, 8.0).unwrap();
        assert_eq!(g.index_of(0.0), Some(32));
        let plan = AxisPlan::new(1.0, DriftSpec::NONE, g, AxisMode::WholeLine).unwrap();
        let mut s = plan.sampler();
        let mut out = vec![0.0; g.n_points];
        let lw = s.draw(&mut stream(1, 0), &mut out, false);
        let total: f64 = out.iter().map(|w| (w + lw).exp()).sum::<f64>() * g.step();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
