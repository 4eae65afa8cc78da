//! Gaussian and Gaussian-related path generators.
//!
//! Everything here is a pure function of `(spec, domain, seed)`. The
//! `*Plan` types hold the precomputed factorizations and can be shared
//! across workers; each worker builds its own sampler with private scratch.

mod circulant;
pub(crate) mod fbm;

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use circulant::{
    CirculantEmbedding, CirculantSampler, DenseFactor, StationaryPlan, StationarySampler,
    CLIP_TOLERANCE, DENSE_LIMIT,
};
pub use fbm::{fbm_covariance, fgn_autocovariance, simulate_fbm, FbmPlan, FbmSampler};

use crate::error::{ensure, invalid, Result};
use crate::grid::{Domain, Field2D, GridSpec, Lattice2D, Realization, SamplePath};
use crate::rng::stream;

/// Drift `h(t) = b |t|^β`; `b = 0` means no drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub coefficient: f64,
    pub exponent: f64,
}

impl DriftSpec {
    pub const NONE: DriftSpec = DriftSpec {
        coefficient: 0.0,
        exponent: 1.0,
    };

    pub fn new(coefficient: f64, exponent: f64) -> Result<Self> {
        let d = Self {
            coefficient,
            exponent,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.coefficient >= 0.0 && self.coefficient.is_finite(), "drift.coefficient", || {
            format!("must be finite and >= 0, got {}", self.coefficient)
        })?;
        ensure(self.exponent > 0.0 && self.exponent.is_finite(), "drift.exponent", || {
            format!("must be finite and > 0, got {}", self.exponent)
        })
    }

    pub fn is_zero(&self) -> bool {
        self.coefficient == 0.0
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.coefficient * t.abs().powf(self.exponent)
        }
    }
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self::NONE
    }
}

/// Parameters of `r(t) = exp(-a |t|^α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpCorrelation {
    pub a: f64,
    pub alpha: f64,
}

impl ExpCorrelation {
    pub fn new(a: f64, alpha: f64) -> Result<Self> {
        let c = Self { a, alpha };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.a > 0.0 && self.a.is_finite(), "a", || format!("must be > 0, got {}", self.a))?;
        fbm::check_alpha(self.alpha)
    }

    pub fn correlation(&self, lag: f64) -> f64 {
        (-self.a * lag.abs().powf(self.alpha)).exp()
    }
}

/// Which process to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessSpec {
    /// `√2 B_α(t) − |t|^α − h(t)`, pinned at `t = 0`.
    FbmW { alpha: f64, drift: DriftSpec },
    /// Unit-variance stationary process with `r(t) = exp(−a|t|^α)`.
    StationaryExp1D { a: f64, alpha: f64 },
    /// Field with `r = exp(−a1|Δt1|^α1 − a2|Δt2|^α2)`.
    StationaryExp2D {
        a1: f64,
        a2: f64,
        alpha1: f64,
        alpha2: f64,
    },
    /// `σ(t) Y(t)` with `σ(t) = exp(−b1|t1−t1*|^β1 − b2|t2−t2*|^β2)`.
    ScaledVariance2D {
        base: ExpField,
        b1: f64,
        b2: f64,
        beta1: f64,
        beta2: f64,
        t_star: (f64, f64),
    },
    /// `sqrt(Σ_{i≤m} X_i(t)^2)` for iid stationary `X_i`.
    Chi { m: usize, a: f64, alpha: f64 },
    /// `Q(t) = max_{t ≤ s ≤ t+H} (B_α(s) − B_α(t) − c(s−t))`, `H = K τ* u_ref`.
    Queue {
        alpha: f64,
        c: f64,
        horizon_mult: f64,
        level_ref: f64,
    },
}

/// The separable exponential base field of [`ProcessSpec::ScaledVariance2D`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpField {
    pub a1: f64,
    pub a2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl ProcessSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ProcessSpec::FbmW { alpha, drift } => {
                fbm::check_alpha(alpha)?;
                drift.validate()
            }
            ProcessSpec::StationaryExp1D { a, alpha } => ExpCorrelation::new(a, alpha).map(|_| ()),
            ProcessSpec::StationaryExp2D {
                a1,
                a2,
                alpha1,
                alpha2,
            } => {
                ExpCorrelation::new(a1, alpha1)?;
                ExpCorrelation::new(a2, alpha2).map(|_| ())
            }
            ProcessSpec::ScaledVariance2D {
                base,
                b1,
                b2,
                beta1,
                beta2,
                t_star,
            } => {
                ExpCorrelation::new(base.a1, base.alpha1)?;
                ExpCorrelation::new(base.a2, base.alpha2)?;
                for (name, v) in [("b1", b1), ("b2", b2), ("beta1", beta1), ("beta2", beta2)] {
                    ensure(v > 0.0 && v.is_finite(), name, || format!("must be > 0, got {v}"))?;
                }
                ensure(t_star.0.is_finite() && t_star.1.is_finite(), "t_star", || {
                    "must be finite".into()
                })
            }
            ProcessSpec::Chi { m, a, alpha } => {
                ensure(m >= 1, "m", || "chi degree must be >= 1".into())?;
                ExpCorrelation::new(a, alpha).map(|_| ())
            }
            ProcessSpec::Queue {
                alpha,
                c,
                horizon_mult,
                level_ref,
            } => {
                ensure(alpha > 0.0 && alpha < 2.0, "alpha", || {
                    format!("queue input needs alpha in (0, 2), got {alpha}")
                })?;
                ensure(c > 0.0 && c.is_finite(), "c", || format!("must be > 0, got {c}"))?;
                ensure(horizon_mult > 0.0, "horizon_mult", || {
                    format!("must be > 0, got {horizon_mult}")
                })?;
                ensure(level_ref > 0.0, "level_ref", || format!("must be > 0, got {level_ref}"))
            }
        }
    }

    fn is_planar(&self) -> bool {
        matches!(
            self,
            ProcessSpec::StationaryExp2D { .. } | ProcessSpec::ScaledVariance2D { .. }
        )
    }
}

/// `τ* = α / (c (2 − α))`, the most likely time to overflow.
pub fn queue_tau_star(alpha: f64, c: f64) -> f64 {
    alpha / (c * (2.0 - alpha))
}

/// Lookahead window used by the queue generator, `K τ* u_ref`.
pub fn queue_horizon(alpha: f64, c: f64, horizon_mult: f64, level_ref: f64) -> f64 {
    horizon_mult * queue_tau_star(alpha, c) * level_ref
}

/// Per-axis dense factor of `exp(−a|Δt|^α)` on `grid`.
pub fn exp_axis_factor(corr: ExpCorrelation, grid: &GridSpec) -> Result<DenseFactor> {
    let pts = grid.points();
    let n = pts.len();
    let cov = DMatrix::from_fn(n, n, |i, j| corr.correlation(pts[i] - pts[j]));
    DenseFactor::from_covariance(&cov)
}

fn stationary_plan(corr: ExpCorrelation, grid: &GridSpec) -> Result<StationaryPlan> {
    let step = grid.step();
    let acov = move |k: usize| corr.correlation(k as f64 * step);
    StationaryPlan::new(&acov, grid.n_points)
}

#[derive(Debug, Clone)]
struct KroneckerPlan {
    l1: Arc<DMatrix<f64>>,
    l2t: Arc<DMatrix<f64>>,
}

impl KroneckerPlan {
    fn new(c1: ExpCorrelation, c2: ExpCorrelation, lattice: &Lattice2D) -> Result<Self> {
        let l1 = exp_axis_factor(c1, &lattice.axis1)?.matrix();
        let l2 = exp_axis_factor(c2, &lattice.axis2)?.matrix();
        Ok(Self {
            l1: Arc::new(l1),
            l2t: Arc::new(l2.transpose()),
        })
    }

    fn fill<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut DMatrix<f64>, out: &mut [f64]) {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let y = &*self.l1 * &*z * &*self.l2t;
        let n2 = y.ncols();
        for i in 0..y.nrows() {
            for j in 0..n2 {
                out[i * n2 + j] = y[(i, j)];
            }
        }
    }
}

#[derive(Debug, Clone)]
enum PlanKind {
    FbmW {
        fbm: FbmPlan,
        trend: Vec<f64>,
    },
    Stationary(StationaryPlan),
    Kronecker {
        plan: KroneckerPlan,
        sigma: Option<Vec<f64>>,
    },
    Chi {
        base: StationaryPlan,
        m: usize,
    },
    Queue {
        fbm: FbmPlan,
        c: f64,
        window: usize,
    },
}

/// Precomputed generator for one `(spec, domain)` pair.
#[derive(Debug, Clone)]
pub struct ProcessPlan {
    spec: ProcessSpec,
    domain: Domain,
    kind: PlanKind,
}

impl ProcessPlan {
    pub fn new(spec: ProcessSpec, domain: Domain) -> Result<Self> {
        spec.validate()?;
        let kind = match (spec, domain) {
            (s, Domain::Line(_)) if s.is_planar() => {
                return Err(invalid("domain", "this process needs a 2D lattice"))
            }
            (s, Domain::Plane(_)) if !s.is_planar() => {
                return Err(invalid("domain", "this process needs a 1D grid"))
            }
            (ProcessSpec::FbmW { alpha, drift }, Domain::Line(grid)) => {
                let fbm = FbmPlan::pinned_at_origin(alpha, grid)?;
                let trend = grid
                    .points()
                    .iter()
                    .map(|&t| -t.abs().powf(alpha) - drift.eval(t))
                    .collect();
                PlanKind::FbmW { fbm, trend }
            }
            (ProcessSpec::StationaryExp1D { a, alpha }, Domain::Line(grid)) => {
                PlanKind::Stationary(stationary_plan(ExpCorrelation { a, alpha }, &grid)?)
            }
            (ProcessSpec::Chi { m, a, alpha }, Domain::Line(grid)) => PlanKind::Chi {
                base: stationary_plan(ExpCorrelation { a, alpha }, &grid)?,
                m,
            },
            (
                ProcessSpec::Queue {
                    alpha,
                    c,
                    horizon_mult,
                    level_ref,
                },
                Domain::Line(grid),
            ) => {
                let step = grid.step();
                let h = queue_horizon(alpha, c, horizon_mult, level_ref);
                let window = (h / step).ceil().max(1.0) as usize;
                let ext = GridSpec::new(
                    grid.start,
                    grid.start + (grid.n_points - 1 + window) as f64 * step,
                    grid.n_points + window,
                )?;
                PlanKind::Queue {
                    fbm: FbmPlan::pinned_at(alpha, ext, 0)?,
                    c,
                    window,
                }
            }
            (
                ProcessSpec::StationaryExp2D {
                    a1,
                    a2,
                    alpha1,
                    alpha2,
                },
                Domain::Plane(lattice),
            ) => PlanKind::Kronecker {
                plan: KroneckerPlan::new(
                    ExpCorrelation { a: a1, alpha: alpha1 },
                    ExpCorrelation { a: a2, alpha: alpha2 },
                    &lattice,
                )?,
                sigma: None,
            },
            (
                ProcessSpec::ScaledVariance2D {
                    base,
                    b1,
                    b2,
                    beta1,
                    beta2,
                    t_star,
                },
                Domain::Plane(lattice),
            ) => {
                let p1 = lattice.axis1.points();
                let p2 = lattice.axis2.points();
                let mut sigma = Vec::with_capacity(p1.len() * p2.len());
                for &t1 in &p1 {
                    for &t2 in &p2 {
                        sigma.push(scaled_sigma(t1, t2, b1, b2, beta1, beta2, t_star));
                    }
                }
                PlanKind::Kronecker {
                    plan: KroneckerPlan::new(
                        ExpCorrelation { a: base.a1, alpha: base.alpha1 },
                        ExpCorrelation { a: base.a2, alpha: base.alpha2 },
                        &lattice,
                    )?,
                    sigma: Some(sigma),
                }
            }
            _ => unreachable!("dimension mismatch handled above"),
        };
        Ok(Self { spec, domain, kind })
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Number of values per sample.
    pub fn len(&self) -> usize {
        match self.domain {
            Domain::Line(g) => g.n_points,
            Domain::Plane(l) => l.axis1.n_points * l.axis2.n_points,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sampler(&self) -> ProcessSampler {
        let state = match &self.kind {
            PlanKind::FbmW { fbm, .. } => SamplerState::Fbm(fbm.sampler(), Vec::new()),
            PlanKind::Stationary(p) => SamplerState::Stationary(p.sampler(), Vec::new()),
            PlanKind::Chi { base, .. } => {
                SamplerState::Stationary(base.sampler(), vec![0.0; base.len()])
            }
            PlanKind::Kronecker { .. } => {
                let Domain::Plane(l) = self.domain else { unreachable!() };
                SamplerState::Kronecker(DMatrix::zeros(l.axis1.n_points, l.axis2.n_points))
            }
            PlanKind::Queue { fbm, .. } => SamplerState::Fbm(fbm.sampler(), vec![0.0; fbm.grid().n_points]),
        };
        ProcessSampler {
            plan: self.clone(),
            state,
        }
    }
}

fn scaled_sigma(t1: f64, t2: f64, b1: f64, b2: f64, beta1: f64, beta2: f64, t_star: (f64, f64)) -> f64 {
    (-b1 * (t1 - t_star.0).abs().powf(beta1) - b2 * (t2 - t_star.1).abs().powf(beta2)).exp()
}

enum SamplerState {
    Fbm(FbmSampler, Vec<f64>),
    Stationary(StationarySampler, Vec<f64>),
    Kronecker(DMatrix<f64>),
}

/// Worker-local sampler; see [`ProcessPlan`].
pub struct ProcessSampler {
    plan: ProcessPlan,
    state: SamplerState,
}

impl ProcessSampler {
    pub fn len(&self) -> usize {
        self.plan.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Writes one sample (row-major for fields) into `out`.
    pub fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        match (&self.plan.kind, &mut self.state) {
            (PlanKind::FbmW { trend, .. }, SamplerState::Fbm(s, _)) => {
                s.fill(rng, out);
                for (o, tr) in out.iter_mut().zip(trend) {
                    *o = std::f64::consts::SQRT_2 * *o + tr;
                }
            }
            (PlanKind::Stationary(_), SamplerState::Stationary(s, _)) => s.fill(rng, out),
            (PlanKind::Chi { m, .. }, SamplerState::Stationary(s, buf)) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for _ in 0..*m {
                    s.fill(rng, buf);
                    for (o, x) in out.iter_mut().zip(buf.iter()) {
                        *o += x * x;
                    }
                }
                out.iter_mut().for_each(|o| *o = o.sqrt());
            }
            (PlanKind::Kronecker { plan, sigma }, SamplerState::Kronecker(z)) => {
                plan.fill(rng, z, out);
                if let Some(sigma) = sigma {
                    for (o, s) in out.iter_mut().zip(sigma) {
                        *o *= s;
                    }
                }
            }
            (PlanKind::Queue { c, window, .. }, SamplerState::Fbm(s, ext)) => {
                s.fill(rng, ext);
                let step = s_step(&self.plan.domain);
                for (j, y) in ext.iter_mut().enumerate() {
                    *y -= c * j as f64 * step;
                }
                sliding_future_max_minus_now(ext, *window, out);
            }
            _ => unreachable!("sampler state matches plan"),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Realization {
        let mut values = vec![0.0; self.len()];
        self.fill(rng, &mut values);
        match self.plan.domain {
            Domain::Line(g) => Realization::Path(SamplePath { grid: g, values }),
            Domain::Plane(l) => Realization::Field(Field2D { lattice: l, values }),
        }
    }
}

fn s_step(domain: &Domain) -> f64 {
    match domain {
        Domain::Line(g) => g.step(),
        Domain::Plane(l) => l.axis1.step(),
    }
}

/// `out[i] = max_{i ≤ j ≤ i+window} y[j] − y[i]` for `i < out.len()`.
fn sliding_future_max_minus_now(y: &[f64], window: usize, out: &mut [f64]) {
    let n = out.len();
    debug_assert!(y.len() >= n + window);
    // monotone deque of indices, scanned right to left
    let mut dq: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let last = n - 1 + window;
    for j in (0..=last).rev() {
        while let Some(&b) = dq.back() {
            if y[b] <= y[j] {
                dq.pop_back();
            } else {
                break;
            }
        }
        dq.push_back(j);
        while let Some(&f) = dq.front() {
            if f > j + window {
                dq.pop_front();
            } else {
                break;
            }
        }
        if j < n {
            out[j] = y[dq[0]] - y[j];
        }
    }
}

/// One realization of `spec` on `domain`, driven by stream 0 of `seed`.
pub fn simulate_process(spec: ProcessSpec, domain: Domain, seed: u64) -> Result<Realization> {
    let plan = ProcessPlan::new(spec, domain)?;
    let mut sampler = plan.sampler();
    let mut rng = stream(seed, 0);
    Ok(sampler.sample(&mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(a: f64, b: f64, n: usize) -> Domain {
        Domain::Line(GridSpec::new(a, b, n).unwrap())
    }

    #[test]
    fn fbm_w_vanishes_at_origin() {
        let spec = ProcessSpec::FbmW {
            alpha: 1.0,
            drift: DriftSpec::NONE,
        };
        let r = simulate_process(spec, line(0.0, 2.0, 201), 4).unwrap();
        assert_eq!(r.values()[0], 0.0);
        let spec = ProcessSpec::FbmW {
            alpha: 1.0,
            drift: DriftSpec::new(2.0, 1.5).unwrap(),
        };
        let r = simulate_process(spec, line(-1.0, 1.0, 201), 4).unwrap();
        assert_eq!(r.values()[100], 0.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let spec = ProcessSpec::StationaryExp1D { a: 1.0, alpha: 1.0 };
        let lat = Lattice2D::new(GridSpec::new(0.0, 1.0, 4).unwrap(), GridSpec::new(0.0, 1.0, 4).unwrap());
        assert!(simulate_process(spec, Domain::Plane(lat), 0).is_err());
        let spec2 = ProcessSpec::StationaryExp2D { a1: 1.0, a2: 1.0, alpha1: 1.0, alpha2: 1.0 };
        assert!(simulate_process(spec2, line(0.0, 1.0, 4), 0).is_err());
    }

    #[test]
    fn queue_rejects_alpha_two() {
        let spec = ProcessSpec::Queue {
            alpha: 2.0,
            c: 1.0,
            horizon_mult: 5.0,
            level_ref: 1.0,
        };
        assert!(simulate_process(spec, line(0.0, 1.0, 11), 0).is_err());
    }

    #[test]
    fn queue_is_nonnegative() {
        let spec = ProcessSpec::Queue {
            alpha: 1.0,
            c: 1.0,
            horizon_mult: 5.0,
            level_ref: 1.0,
        };
        let r = simulate_process(spec, line(0.0, 1.0, 101), 2).unwrap();
        assert!(r.values().iter().all(|&q| q >= 0.0));
    }

    #[test]
    fn sliding_max_matches_brute_force() {
        let y: Vec<f64> = (0..40).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let w = 7;
        let mut out = vec![0.0; 33];
        sliding_future_max_minus_now(&y, w, &mut out);
        for i in 0..33 {
            let m = y[i..=i + w].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(out[i], m - y[i]);
        }
    }

    #[test]
    fn chi_is_nonnegative_and_deterministic() {
        let spec = ProcessSpec::Chi { m: 3, a: 1.0, alpha: 1.0 };
        let a = simulate_process(spec, line(0.0, 1.0, 50), 8).unwrap();
        let b = simulate_process(spec, line(0.0, 1.0, 50), 8).unwrap();
        assert_eq!(a, b);
        assert!(a.values().iter().all(|&v| v >= 0.0));
        assert!(ProcessSpec::Chi { m: 0, a: 1.0, alpha: 1.0 }.validate().is_err());
    }

    #[test]
    fn scaled_variance_peaks_at_t_star() {
        let (b1, b2, beta1, beta2, ts) = (1.0, 2.0, 1.5, 2.0, (0.3, -0.2));
        let lat = Lattice2D::new(GridSpec::new(-1.0, 1.0, 21).unwrap(), GridSpec::new(-1.0, 1.0, 21).unwrap());
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (i, &t1) in lat.axis1.points().iter().enumerate() {
            for (j, &t2) in lat.axis2.points().iter().enumerate() {
                let s = scaled_sigma(t1, t2, b1, b2, beta1, beta2, ts);
                assert!(s <= 1.0);
                if s > best.2 {
                    best = (i, j, s);
                }
            }
        }
        assert_eq!((best.0, best.1), (lat.axis1.nearest_index(ts.0), lat.axis2.nearest_index(ts.1)));
        assert_eq!(scaled_sigma(ts.0, ts.1, b1, b2, beta1, beta2, ts), 1.0);
    }

    #[test]
    fn drift_validation() {
        assert!(DriftSpec::new(-1.0, 1.0).is_err());
        assert!(DriftSpec::new(1.0, 0.0).is_err());
        assert_eq!(DriftSpec::new(2.0, 2.0).unwrap().eval(-3.0), 18.0);
        assert_eq!(DriftSpec::NONE.eval(5.0), 0.0);
    }
}
