//! Desk-scale experiments on conditional sojourn laws: scaling functions
//! `v(u)`, empirical conditional curves against Berman-constant targets,
//! the double-sum ratio, and the reflected-fBm queue.

mod double_sum;
mod experiment;
mod queue;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::gauss::{queue_tau_star, DriftSpec};
use crate::special::normal_tail;

pub use double_sum::{double_sum_diagnostic, DoubleSumConfig, DoubleSumResult, DoubleSumRow};
pub use experiment::{
    conditional_sojourn_cdf, conditional_sojourn_ladder, wilson_interval, ExperimentConfig, ExperimentResult,
    GridScaling, LadderResult, QueueRegime, TargetConfig, TARGET_STREAM,
};
pub use queue::{queue_event_probability, queue_prediction_ladder, QueueEventEstimate, QueueMethod, QueuePoint};

/// Experiment families with the parameters their scaling needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalingFamily {
    /// Stationary process with `1 − r(t) ~ a|t|^α`.
    Stationary1D { a: f64, alpha: f64 },
    Stationary2D { a1: f64, a2: f64, alpha1: f64, alpha2: f64 },
    /// Field with `1 − σ(t) ~ Σ b_i|t_i|^{β_i}` around a single maximum.
    OnePoint2D {
        a: [f64; 2],
        alpha: [f64; 2],
        b: [f64; 2],
        beta: [f64; 2],
    },
    /// Chi process of degree `m` built from stationary components.
    Chi { m: usize, a: f64, alpha: f64 },
    /// Reflected fBm with drift `c`.
    Queue { alpha: f64, c: f64 },
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    ensure(v > 0.0 && v.is_finite(), name, || format!("must be positive and finite, got {v}"))
}

fn alpha_in(name: &'static str, v: f64, closed_at_two: bool) -> Result<()> {
    let ok = v > 0.0 && if closed_at_two { v <= 2.0 } else { v < 2.0 };
    let range = if closed_at_two { "(0, 2]" } else { "(0, 2)" };
    ensure(ok, name, || format!("must lie in {range}, got {v}"))
}

impl ScalingFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ScalingFamily::Stationary1D { a, alpha } => {
                positive("a", a)?;
                alpha_in("alpha", alpha, true)
            }
            ScalingFamily::Stationary2D { a1, a2, alpha1, alpha2 } => {
                positive("a1", a1)?;
                positive("a2", a2)?;
                alpha_in("alpha1", alpha1, true)?;
                alpha_in("alpha2", alpha2, true)
            }
            ScalingFamily::OnePoint2D { a, alpha, b, beta } => {
                for i in 0..2 {
                    positive("a", a[i])?;
                    alpha_in("alpha", alpha[i], true)?;
                    positive("b", b[i])?;
                    positive("beta", beta[i])?;
                }
                Ok(())
            }
            ScalingFamily::Chi { m, a, alpha } => {
                ensure(m >= 1, "m", || "chi degree must be >= 1".into())?;
                positive("a", a)?;
                alpha_in("alpha", alpha, true)
            }
            ScalingFamily::Queue { alpha, c } => {
                alpha_in("alpha", alpha, false)?;
                positive("c", c)
            }
        }
    }

    pub fn is_planar(&self) -> bool {
        matches!(self, ScalingFamily::Stationary2D { .. } | ScalingFamily::OnePoint2D { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScalingFamily::Stationary1D { .. } => "stationary1d",
            ScalingFamily::Stationary2D { .. } => "stationary2d",
            ScalingFamily::OnePoint2D { .. } => "onepoint2d",
            ScalingFamily::Chi { .. } => "chi",
            ScalingFamily::Queue { .. } => "queue",
        }
    }
}

/// `v(u)`, the sojourn scale at level `u`.
pub fn scaling_function(family: &ScalingFamily, u: f64) -> Result<f64> {
    family.validate()?;
    positive("u", u)?;
    Ok(match *family {
        ScalingFamily::Stationary1D { a, alpha } | ScalingFamily::Chi { a, alpha, .. } => {
            a.powf(-1.0 / alpha) * u.powf(-2.0 / alpha)
        }
        ScalingFamily::Stationary2D { a1, a2, alpha1, alpha2 } => {
            a1.powf(-1.0 / alpha1) * a2.powf(-1.0 / alpha2) * u.powf(-2.0 / alpha1 - 2.0 / alpha2)
        }
        ScalingFamily::OnePoint2D { a, alpha, beta, .. } => (0..2)
            .map(|i| {
                // α* = ∞ when α > β, and a^{−1/∞} = 1
                let a_part = if alpha[i] <= beta[i] { a[i].powf(-1.0 / alpha[i]) } else { 1.0 };
                a_part * u.powf(-2.0 / alpha[i].min(beta[i]))
            })
            .product(),
        ScalingFamily::Queue { alpha, c } => QueueAsymptotics::new(alpha, c, u)?.v_u,
    })
}

/// Target-constant parameters of one axis of the single-maximum field:
/// the exponent `α̂` of the fBm part and the drift `ā b |t|^β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnePointAxis {
    pub alpha_hat: f64,
    pub drift: DriftSpec,
    /// `α < β`: per-length constant over `[0, S]`; otherwise `[−S, S]`.
    pub normalized: bool,
}

pub fn onepoint_axis(a: f64, alpha: f64, b: f64, beta: f64) -> Result<OnePointAxis> {
    let (a_bar, alpha_hat) = if alpha < beta {
        (0.0, alpha)
    } else if alpha == beta {
        (1.0 / a, alpha)
    } else {
        (1.0, 0.0)
    };
    let drift = if a_bar == 0.0 { DriftSpec::NONE } else { DriftSpec::new(a_bar * b, beta)? };
    Ok(OnePointAxis {
        alpha_hat,
        drift,
        normalized: alpha < beta,
    })
}

/// Closed-form quantities of the reflected fBm queue at level `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueAsymptotics {
    pub alpha: f64,
    pub c: f64,
    pub u: f64,
    pub tau_star: f64,
    pub m_u: f64,
    pub a: f64,
    pub b: f64,
    pub v_u: f64,
    pub q_u: f64,
}

impl QueueAsymptotics {
    pub fn new(alpha: f64, c: f64, u: f64) -> Result<Self> {
        alpha_in("alpha", alpha, false)?;
        positive("c", c)?;
        positive("u", u)?;
        let tau = queue_tau_star(alpha, c);
        let m_u = (1.0 + c * tau) * tau.powf(-alpha / 2.0) * u.powf(1.0 - alpha / 2.0);
        let a = tau.powf(-alpha / 2.0) * 2.0 / (2.0 - alpha);
        let b = tau.powf(-alpha / 2.0 - 1.0) * alpha / 2.0;
        // (√2 τ^α / (1 + cτ))^{2/α}, written without the square root
        let v_u = u.powf(2.0 * (alpha - 1.0) / alpha)
            * (2.0 * tau.powf(2.0 * alpha) / (1.0 + c * tau).powi(2)).powf(1.0 / alpha);
        Ok(Self {
            alpha,
            c,
            u,
            tau_star: tau,
            m_u,
            a,
            b,
            v_u,
            q_u: v_u / u,
        })
    }

    /// `√(2A/B)`.
    pub fn sqrt_2a_over_b(&self) -> f64 {
        (2.0 * self.a / self.b).sqrt()
    }

    /// `√(2Aπ/B) · u / (m(u) v(u)) · Ψ(m(u))`: the factor multiplying the
    /// mixed constant in the short-interval approximation.
    pub fn prefactor(&self) -> f64 {
        (2.0 * self.a * std::f64::consts::PI / self.b).sqrt() * self.u / (self.m_u * self.v_u) * normal_tail(self.m_u)
    }
}

/// Predicted `P(∫_{[0, v(u)n]} I(Q(t) > u) dt > v(u)x)` from a supplied
/// estimate of the mixed constant `B̂_{α,α}(x, n)`.
pub fn queue_prefactor(alpha: f64, c: f64, u: f64, n: f64, x: f64, bhat: f64) -> Result<f64> {
    ensure(x >= 0.0, "x", || format!("must be nonnegative, got {x}"))?;
    ensure(n > x, "n", || format!("need n > x, got n = {n}, x = {x}"))?;
    ensure(bhat >= 0.0 && bhat.is_finite(), "bhat", || format!("must be finite and nonnegative, got {bhat}"))?;
    Ok(bhat * QueueAsymptotics::new(alpha, c, u)?.prefactor())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scaling_examples() {
        let f = ScalingFamily::Stationary2D { a1: 1.0, a2: 1.0, alpha1: 1.0, alpha2: 1.0 };
        assert_relative_eq!(scaling_function(&f, 10.0).unwrap(), 1e-4, max_relative = 1e-14);
        let f = ScalingFamily::Chi { m: 3, a: 1.0, alpha: 2.0 };
        assert_relative_eq!(scaling_function(&f, 10.0).unwrap(), 0.1, max_relative = 1e-14);
        let f = ScalingFamily::Queue { alpha: 1.0, c: 1.0 };
        for u in [0.5, 3.0, 8.0, 100.0] {
            assert_eq!(scaling_function(&f, u).unwrap(), 0.5);
        }
    }

    #[test]
    fn onepoint_scaling_uses_smaller_exponent() {
        // α1 < β1 contributes a1^{-1/α1} u^{-2/α1}; α2 > β2 contributes u^{-2/β2} only
        let f = ScalingFamily::OnePoint2D { a: [4.0, 9.0], alpha: [1.0, 2.0], b: [1.0, 1.0], beta: [2.0, 1.0] };
        let u: f64 = 3.0;
        let expect = 4f64.powf(-1.0) * u.powf(-2.0) * u.powf(-2.0);
        assert_relative_eq!(scaling_function(&f, u).unwrap(), expect, max_relative = 1e-14);
    }

    #[test]
    fn onepoint_axis_table() {
        let ax = onepoint_axis(2.0, 1.0, 3.0, 2.0).unwrap();
        assert_eq!((ax.alpha_hat, ax.drift.is_zero(), ax.normalized), (1.0, true, true));
        let ax = onepoint_axis(2.0, 1.0, 3.0, 1.0).unwrap();
        assert_eq!((ax.alpha_hat, ax.drift.coefficient, ax.normalized), (1.0, 1.5, false));
        let ax = onepoint_axis(2.0, 1.5, 3.0, 1.0).unwrap();
        assert_eq!((ax.alpha_hat, ax.drift.coefficient, ax.drift.exponent, ax.normalized), (0.0, 3.0, 1.0, false));
    }

    #[test]
    fn queue_closed_forms_at_unit_parameters() {
        for u in [4.0, 6.0, 8.0] {
            let q = QueueAsymptotics::new(1.0, 1.0, u).unwrap();
            assert_eq!(q.tau_star, 1.0);
            assert_eq!(q.a, 2.0);
            assert_eq!(q.b, 0.5);
            assert_relative_eq!(q.m_u, 2.0 * u.sqrt(), max_relative = 1e-15);
            assert_relative_eq!(q.v_u, 0.5, max_relative = 1e-15);
            assert_relative_eq!(q.q_u, 0.5 / u, max_relative = 1e-15);
            assert_relative_eq!(q.sqrt_2a_over_b(), 8f64.sqrt(), max_relative = 1e-15);
        }
    }

    #[test]
    fn queue_prefactor_rules() {
        assert!(queue_prefactor(1.0, 1.0, 6.0, 2.0, 2.0, 1.0).is_err());
        assert!(queue_prefactor(2.0, 1.0, 6.0, 2.0, 0.0, 1.0).is_err());
        assert_eq!(queue_prefactor(1.0, 1.0, 6.0, 2.0, 1.99, 0.0).unwrap(), 0.0);
        let p = queue_prefactor(1.0, 1.0, 6.0, 2.0, 0.0, 3.0).unwrap();
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn invalid_families_rejected() {
        assert!(scaling_function(&ScalingFamily::Queue { alpha: 2.0, c: 1.0 }, 1.0).is_err());
        assert!(scaling_function(&ScalingFamily::Chi { m: 0, a: 1.0, alpha: 1.0 }, 1.0).is_err());
        assert!(scaling_function(&ScalingFamily::Stationary1D { a: 1.0, alpha: 1.0 }, 0.0).is_err());
    }
}
