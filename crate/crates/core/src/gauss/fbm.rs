//! Fractional Brownian motion on a uniform grid, pinned to zero at one node.

use rand::Rng;
use rand_distr::StandardNormal;

use super::circulant::{StationaryPlan, StationarySampler};
use crate::error::{ensure, invalid, Result};
use crate::grid::{GridSpec, SamplePath};
use crate::rng::stream;

/// Autocovariance of fractional Gaussian noise with step `step`:
/// `Cov(B(t+Δ)-B(t), B(t+(k+1)Δ)-B(t+kΔ))`.
pub fn fgn_autocovariance(alpha: f64, step: f64, k: usize) -> f64 {
    let k = k as f64;
    let f = |x: f64| x.abs().powf(alpha);
    0.5 * step.powf(alpha) * (f(k + 1.0) - 2.0 * f(k) + f(k - 1.0))
}

/// `Cov(B(s), B(t)) = (|s|^α + |t|^α − |t−s|^α) / 2`.
pub fn fbm_covariance(alpha: f64, s: f64, t: f64) -> f64 {
    0.5 * (s.abs().powf(alpha) + t.abs().powf(alpha) - (t - s).abs().powf(alpha))
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    ensure(alpha > 0.0 && alpha <= 2.0, "alpha", || {
        format!("must lie in (0, 2], got {alpha}")
    })
}

#[derive(Debug, Clone)]
enum Increments {
    /// `α = 2`: `B(t) = t ξ`.
    Line,
    Noise(StationaryPlan),
}

/// Shareable plan for fBm on a fixed grid with `B(grid[anchor]) = 0`.
#[derive(Debug, Clone)]
pub struct FbmPlan {
    alpha: f64,
    grid: GridSpec,
    anchor: usize,
    increments: Increments,
}

impl FbmPlan {
    /// Pins the path at the node equal to `0`; the grid must contain it.
    pub fn pinned_at_origin(alpha: f64, grid: GridSpec) -> Result<Self> {
        let anchor = grid
            .index_of(0.0)
            .ok_or_else(|| invalid("grid", format!("0 is not a node of [{}, {}] with {} points", grid.start, grid.end, grid.n_points)))?;
        Self::pinned_at(alpha, grid, anchor)
    }

    pub fn pinned_at(alpha: f64, grid: GridSpec, anchor: usize) -> Result<Self> {
        check_alpha(alpha)?;
        ensure(anchor < grid.n_points, "anchor", || format!("{anchor} out of range"))?;
        let increments = if alpha == 2.0 {
            Increments::Line
        } else {
            let step = grid.step();
            let acov = move |k: usize| fgn_autocovariance(alpha, step, k);
            Increments::Noise(StationaryPlan::new(&acov, grid.n_points - 1)?)
        };
        Ok(Self {
            alpha,
            grid,
            anchor,
            increments,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn sampler(&self) -> FbmSampler {
        let noise = match &self.increments {
            Increments::Line => None,
            Increments::Noise(p) => Some(p.sampler()),
        };
        FbmSampler {
            plan: self.clone(),
            noise,
            incr: vec![0.0; self.grid.n_points - 1],
        }
    }
}

pub struct FbmSampler {
    plan: FbmPlan,
    noise: Option<StationarySampler>,
    incr: Vec<f64>,
}

impl FbmSampler {
    pub fn len(&self) -> usize {
        self.plan.grid.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        let grid = &self.plan.grid;
        let anchor = self.plan.anchor;
        match &mut self.noise {
            None => {
                let xi: f64 = rng.sample(StandardNormal);
                let t0 = grid.point(anchor);
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (grid.point(i) - t0) * xi;
                }
            }
            Some(noise) => {
                noise.fill(rng, &mut self.incr);
                out[0] = 0.0;
                for i in 1..out.len() {
                    out[i] = out[i - 1] + self.incr[i - 1];
                }
                let shift = out[anchor];
                if shift != 0.0 {
                    for o in out.iter_mut() {
                        *o -= shift;
                    }
                }
                out[anchor] = 0.0;
            }
        }
    }
}

/// One fBm path on `grid` (which must contain `0`, normally as its first
/// node), driven by stream 0 of `seed`.
pub fn simulate_fbm(alpha: f64, grid: GridSpec, seed: u64) -> Result<SamplePath> {
    let plan = FbmPlan::pinned_at_origin(alpha, grid)?;
    let mut sampler = plan.sampler();
    let mut rng = stream(seed, 0);
    let mut values = vec![0.0; grid.n_points];
    sampler.fill(&mut rng, &mut values);
    SamplePath::new(grid, values)
}
