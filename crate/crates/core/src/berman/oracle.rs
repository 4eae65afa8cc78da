//! Deterministic reference values.
//!
//! For `α = 2` the fBm is a random line `B(t) = tξ`, so
//! `W(t) = √2ξt − t²` is a parabola and every sojourn functional reduces
//! to a one-dimensional Gaussian integral over `ξ`.

use crate::error::{ensure, Result};
use crate::special::{gauss_legendre, normal_cdf};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Length of `{t ∈ [0, s] : 2ct − t² > z}`.
pub fn parabola_sojourn(c: f64, s: f64, z: f64) -> f64 {
    let d = c * c - z;
    if d <= 0.0 {
        return 0.0;
    }
    let r = d.sqrt();
    ((c + r).min(s) - (c - r).max(0.0)).max(0.0)
}

/// Level `z` at which the parabola `2ct − t²` on `[0, s]` has sojourn
/// exactly `x`, found by bisection (`x < s`).
pub fn parabola_level(c: f64, s: f64, x: f64) -> f64 {
    let w = |t: f64| 2.0 * c * t - t * t;
    let vertex = c.clamp(0.0, s);
    let mut hi = w(vertex);
    if x <= 0.0 {
        return hi;
    }
    let mut lo = w(0.0).min(w(s));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if parabola_sojourn(c, s, mid) > x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `B_2(x, [0, s])` by piecewise Gauss–Legendre quadrature over `ξ`.
///
/// `z_x(ξ)` is smooth except where the super-level interval hits an
/// endpoint of `[0, s]` (at `ξ = x/√2` and `ξ = √2(s − x/2)`); the
/// integration range is split there and into pieces of length at most 4.
pub fn berman2_parabola_oracle(x: f64, s: f64, quadrature_order: usize) -> Result<f64> {
    ensure(s > 0.0, "S", || format!("must be positive, got {s}"))?;
    ensure(x >= 0.0, "x", || format!("must be nonnegative, got {x}"))?;
    ensure(quadrature_order >= 2, "quadrature_order", || "must be at least 2".into())?;
    if x >= s {
        return Ok(0.0);
    }
    let rule = gauss_legendre(quadrature_order);
    let lo = -40.0;
    let hi = 40.0 + SQRT_2 * s;
    let mut cuts = [lo, x / SQRT_2, SQRT_2 * (s - x / 2.0), hi];
    cuts.sort_by(f64::total_cmp);
    let log_norm = -0.5 * (2.0 * std::f64::consts::PI).ln();
    let f = |xi: f64| (parabola_level(xi / SQRT_2, s, x) - 0.5 * xi * xi + log_norm).exp();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let pieces = ((b - a) / 4.0).ceil().max(1.0) as usize;
        let h = (b - a) / pieces as f64;
        for k in 0..pieces {
            let (pa, pb) = (a + k as f64 * h, a + (k + 1) as f64 * h);
            let (m, r) = (0.5 * (pa + pb), 0.5 * (pb - pa));
            total += r * rule.0.iter().zip(&rule.1).map(|(t, wt)| wt * f(m + r * t)).sum::<f64>();
        }
    }
    Ok(total)
}

/// `B_{2,2}(0, [0, s1] × [0, s2])`: the supremum of a sum of independent
/// parabolas splits, so the value is a product of one-dimensional oracles.
pub fn berman2_parabola_oracle_2d(s1: f64, s2: f64, quadrature_order: usize) -> Result<f64> {
    Ok(berman2_parabola_oracle(0.0, s1, quadrature_order)? * berman2_parabola_oracle(0.0, s2, quadrature_order)?)
}

/// `E exp(sup_{[0,s]} (√2 B(t) − t))` for standard Brownian motion `B`:
/// `(s + 2) Φ(√(s/2)) + √(s/π) e^{−s/4}`.
pub fn brownian_sup_oracle(s: f64) -> Result<f64> {
    ensure(s >= 0.0, "S", || format!("must be nonnegative, got {s}"))?;
    Ok((s + 2.0) * normal_cdf((s / 2.0).sqrt()) + (s / std::f64::consts::PI).sqrt() * (-s / 4.0).exp())
}
