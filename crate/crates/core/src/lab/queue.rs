//! Short-window queue event `P(∫_{[0, v(u)n]} I(Q(t) > u) dt > v(u)x)`
//! by simulation, and its prediction from the mixed constant.
//!
//! For Brownian input (`α = 1`) the workload seen beyond the window is an
//! independent `Exp(2c)` variable, so it is integrated out exactly and the
//! per-path estimate is a smooth conditional probability instead of an
//! indicator. The window path is drawn with drift `+c` instead of `−c` and
//! reweighted by `e^{−2cY(end)}`, which removes the lognormal spread of the
//! conditional weight. Other `α` use crude indicators with a finite
//! lookahead.

use serde::{Deserialize, Serialize};

use super::{queue_prefactor, QueueAsymptotics};
use crate::berman::{estimate_berman_1d, estimate_pickands, BermanSettings, LimitSettings};
use crate::error::{ensure, Result};
use crate::gauss::{DriftSpec, FbmPlan, ProcessPlan, ProcessSpec};
use crate::grid::{Domain, GridSpec};
use crate::mc::{batch_mean, run, McSettings};
use crate::rng::derive_seed;
use crate::sojourn::cells_needed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueMethod {
    Conditional,
    Crude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueEventEstimate {
    pub u: f64,
    pub n: f64,
    pub x: f64,
    pub probability: f64,
    pub std_err: f64,
    pub method: QueueMethod,
    pub step: f64,
    pub window_points: usize,
}

/// Conditional probability for one Brownian window path `y` (already with
/// drift removed): `Q_i = max(A_i, C_i + M)` with `A_i` the in-window
/// future maximum, `C_i = y_end − y_i` and `M ~ Exp(2c)` independent.
fn conditional_probability(y: &[f64], u: f64, c: f64, k_needed: usize, thresholds: &mut Vec<f64>) -> f64 {
    let n = y.len();
    if k_needed > n {
        return 0.0;
    }
    let last = y[n - 1];
    let mut suffix_max = f64::NEG_INFINITY;
    let mut base = 0;
    thresholds.clear();
    for i in (0..n).rev() {
        suffix_max = suffix_max.max(y[i]);
        if suffix_max - y[i] > u {
            base += 1;
        } else {
            thresholds.push(u - (last - y[i]));
        }
    }
    if base >= k_needed {
        return 1.0;
    }
    let k = k_needed - base;
    let (_, m_crit, _) = thresholds.select_nth_unstable_by(k - 1, f64::total_cmp);
    (-2.0 * c * m_crit.max(0.0)).exp()
}

#[allow(clippy::too_many_arguments)]
pub fn queue_event_probability(
    alpha: f64,
    c: f64,
    u: f64,
    n: f64,
    x: f64,
    points_per_unit: f64,
    horizon_mult: f64,
    mc: &McSettings,
) -> Result<QueueEventEstimate> {
    mc.validate()?;
    ensure(x >= 0.0 && n > x, "x", || format!("need 0 <= x < n, got x = {x}, n = {n}"))?;
    let q = QueueAsymptotics::new(alpha, c, u)?;
    let window = q.v_u * n;
    let grid = GridSpec::with_density(0.0, window, points_per_unit)?;
    let step = grid.step();
    let k_needed = cells_needed(step, q.v_u * x);
    let (method, col) = if alpha == 1.0 {
        let plan = FbmPlan::pinned_at_origin(1.0, grid)?;
        let m = run(
            mc,
            1,
            || (plan.sampler(), vec![0.0; grid.n_points], Vec::new()),
            |(s, y, th): &mut (_, Vec<f64>, Vec<f64>), rng, out| {
                s.fill(rng, y);
                for (j, v) in y.iter_mut().enumerate() {
                    *v += c * j as f64 * step;
                }
                let weight = (-2.0 * c * y[y.len() - 1]).exp();
                out[0] = weight * conditional_probability(y, u, c, k_needed, th);
            },
        );
        (QueueMethod::Conditional, m.column(0))
    } else {
        let spec = ProcessSpec::Queue { alpha, c, horizon_mult, level_ref: u };
        let plan = ProcessPlan::new(spec, Domain::Line(grid))?;
        let m = run(
            mc,
            1,
            || (plan.sampler(), vec![0.0; grid.n_points]),
            |(s, buf), rng, out| {
                s.fill(rng, buf);
                out[0] = (buf.iter().filter(|&&w| w > u).count() >= k_needed) as u8 as f64;
            },
        );
        (QueueMethod::Crude, m.column(0))
    };
    let (probability, std_err) = batch_mean(&col, mc.batches);
    Ok(QueueEventEstimate {
        u,
        n,
        x,
        probability,
        std_err,
        method,
        step,
        window_points: grid.n_points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueuePoint {
    pub u: f64,
    pub prediction: f64,
    pub simulated: QueueEventEstimate,
    /// prediction / simulated probability.
    pub ratio: f64,
    pub ratio_se: f64,
    pub bhat: f64,
    pub bhat_se: f64,
}

/// Prediction against simulation over a ladder of levels. The mixed
/// constant `B̂_{α,α}(x, n) = H_α · B_α(x, [0, n])` is estimated on the
/// local grid matching the simulation grid; for `α = 1` the lookahead is
/// continuous, so `H_1 = 1` exactly.
#[allow(clippy::too_many_arguments)]
pub fn queue_prediction_ladder(
    alpha: f64,
    c: f64,
    levels: &[f64],
    n: f64,
    x: f64,
    points_per_unit: f64,
    horizon_mult: f64,
    mc: &McSettings,
    bhat_samples: usize,
) -> Result<Vec<QueuePoint>> {
    ensure(!levels.is_empty(), "levels", || "need at least one level".into())?;
    let mut out = Vec::with_capacity(levels.len());
    // Every level reuses the same random streams (common random numbers), so
    // the trend across levels is not masked by independent noise.
    for &u in levels {
        let q = QueueAsymptotics::new(alpha, c, u)?;
        let sim = queue_event_probability(
            alpha,
            c,
            u,
            n,
            x,
            points_per_unit,
            horizon_mult,
            mc,
        )?;
        // local time = original time / v(u)
        let bset = BermanSettings::new(bhat_samples, derive_seed(mc.seed, 0xb4a7)).with_workers(mc.workers);
        let b1 = estimate_berman_1d(alpha, DriftSpec::NONE, x, (0.0, n), sim.window_points, &bset)?;
        let (h, h_se) = if alpha == 1.0 {
            (1.0, 0.0)
        } else {
            let limit = LimitSettings { schedule: vec![4.0, 8.0, 16.0], points_per_unit: q.v_u / sim.step };
            let e = estimate_pickands(alpha, &limit, &bset.with_seed(derive_seed(mc.seed, 0x4a7)))?.estimate;
            (e.value, e.std_err)
        };
        let bhat = h * b1.value;
        let bhat_se = bhat * ((b1.std_err / b1.value).powi(2) + (h_se / h).powi(2)).sqrt();
        let prediction = queue_prefactor(alpha, c, u, n, x, bhat)?;
        let ratio = prediction / sim.probability;
        let ratio_se = ratio * (sim.std_err / sim.probability);
        out.push(QueuePoint { u, prediction, simulated: sim, ratio, ratio_se, bhat, bhat_se });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditional_probability_cases() {
        let mut th = Vec::new();
        // flat path: every point needs M > u
        let y = vec![0.0; 5];
        let p = conditional_probability(&y, 1.0, 1.0, 1, &mut th);
        assert!((p - (-2.0f64).exp()).abs() < 1e-15);
        // a large in-window rise makes the first points exceed regardless of M
        let y = vec![0.0, 0.0, 3.0, 3.0];
        assert_eq!(conditional_probability(&y, 1.0, 1.0, 2, &mut th), 1.0);
        // needing more points than exist is impossible
        assert_eq!(conditional_probability(&y, 1.0, 1.0, 5, &mut th), 0.0);
        // third point needs M > 1, so two points exceed iff M > 1
        let p = conditional_probability(&y, 1.0, 1.0, 3, &mut th);
        assert!((p - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn brownian_marginal_tail() {
        // a one-point window is Q(0) itself: P(Q(0) > u) = e^{-2cu}
        let mut mc = McSettings::new(2000, 1);
        mc.chunk_size = 200;
        let e = queue_event_probability(1.0, 1.0, 1.0, 1e-9, 0.0, 1.0, 5.0, &mc).unwrap();
        assert_eq!(e.window_points, 2);
        assert!((e.probability / (-2.0f64).exp() - 1.0).abs() < 1e-4, "{e:?}");
    }

    #[test]
    fn conditioning_matches_explicit_overflow_draw() {
        // Draw the beyond-window workload M explicitly and count exceedances;
        // averaging the indicator must give the conditional probability.
        use rand_distr::{Distribution, Exp};
        let (u, c, step) = (1.0, 1.0, 1.0 / 64.0);
        let grid = GridSpec::new(0.0, 1.0, 65).unwrap();
        let plan = FbmPlan::pinned_at_origin(1.0, grid).unwrap();
        let k = cells_needed(step, 0.25);
        let mut mc = McSettings::new(40_000, 2);
        mc.chunk_size = 1000;
        let m = run(
            &mc,
            2,
            || (plan.sampler(), vec![0.0; 65], Vec::new()),
            |(s, y, th): &mut (_, Vec<f64>, Vec<f64>), rng, out| {
                s.fill(rng, y);
                for (j, v) in y.iter_mut().enumerate() {
                    *v -= c * j as f64 * step;
                }
                out[0] = conditional_probability(y, u, c, k, th);
                let overflow = Exp::new(2.0 * c).unwrap().sample(rng);
                let last = y[64];
                let mut suffix = f64::NEG_INFINITY;
                let mut count = 0;
                for i in (0..65).rev() {
                    suffix = suffix.max(y[i]);
                    if (suffix - y[i]).max(last - y[i] + overflow) > u {
                        count += 1;
                    }
                }
                out[1] = (count >= k) as u8 as f64;
            },
        );
        let (a, sa) = batch_mean(&m.column(0), 32);
        let (b, sb) = batch_mean(&m.column(1), 32);
        assert!((a - b).abs() < 4.0 * sa.hypot(sb), "{a} vs {b}");
        assert!(sa < sb);
    }

    #[test]
    fn rejects_x_at_window_length() {
        let mc = McSettings::new(200, 1);
        assert!(queue_event_probability(1.0, 1.0, 2.0, 2.0, 2.0, 64.0, 5.0, &mc).is_err());
    }
}
