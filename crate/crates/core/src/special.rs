//! Normal tail and Gauss–Legendre rules.

use statrs::function::erf::erfc;

/// Standard normal tail `Ψ(u) = P(N > u)`, evaluated through `erfc` so that
/// large `u` keeps full relative precision.
pub fn normal_tail(u: f64) -> f64 {
    if u.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(u / std::f64::consts::SQRT_2)
}

pub fn normal_cdf(u: f64) -> f64 {
    normal_tail(-u)
}

pub fn normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "order must be positive");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `∫_a^b f` by an `order`-point Gauss–Legendre rule.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.0
        .iter()
        .zip(&rule.1)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tail_at_zero_is_half() {
        assert_eq!(normal_tail(0.0), 0.5);
    }

    #[test]
    fn tail_vanishes_at_largest_input() {
        assert_eq!(normal_tail(f64::MAX), 0.0);
        assert_eq!(normal_tail(f64::INFINITY), 0.0);
        assert_eq!(normal_tail(f64::NEG_INFINITY), 1.0);
    }

    #[test]
    fn tail_at_upper_quantile() {
        // Independent check: Simpson integration of the density on [u, 12].
        let u = 1.959963985;
        let n = 20_000;
        let h = (12.0 - u) / n as f64;
        let mut s = normal_pdf(u) + normal_pdf(12.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * normal_pdf(u + i as f64 * h);
        }
        let simpson = s * h / 3.0;
        assert!((simpson - 0.025).abs() < 1e-9);
        assert!((normal_tail(u) - 0.025).abs() < 1e-9);
        assert_relative_eq!(normal_tail(u), simpson, max_relative = 1e-10);
    }

    #[test]
    fn tail_keeps_relative_precision_far_out() {
        // Mills-ratio asymptotic series at u = 30 (terms decay like 1/u^2).
        let u: f64 = 30.0;
        let series = normal_pdf(u) / u * (1.0 - 1.0 / u.powi(2) + 3.0 / u.powi(4) - 15.0 / u.powi(6) + 105.0 / u.powi(8));
        assert_relative_eq!(normal_tail(u), series, max_relative = 1e-12);
    }

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(5);
        let v = integrate(|x| x.powi(9) + 3.0 * x.powi(4), -1.0, 2.0, &rule);
        let exact = (2f64.powi(10) - 1.0) / 10.0 + 3.0 * (2f64.powi(5) + 1.0) / 5.0;
        assert_relative_eq!(v, exact, max_relative = 1e-13);
        let s: f64 = gauss_legendre(200).1.iter().sum();
        assert_relative_eq!(s, 2.0, max_relative = 1e-13);
    }
}
