//! Shared numeric primitives: normal cdf/quantile, quadrature nodes,
//! log-sum-exp and the interior clamp applied to all u-data.

use statrs::function::erf;

/// All u-values are pushed this far away from {0, 1} before any kernel
/// evaluation.
pub const U_EPS: f64 = 1e-10;

/// Clamp a value to the open unit interval used for u-data.
#[inline]
pub fn clamp_unit(u: f64) -> f64 {
    u.clamp(U_EPS, 1.0 - U_EPS)
}

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-(x * x) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal cdf via the complementary error function.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile. One Newton step on top of the series
/// inverse keeps the round-trip error near machine precision.
pub fn norm_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let mut x = -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    let pdf = norm_pdf(x);
    if pdf > 1e-300 {
        x -= (norm_cdf(x) - p) / pdf;
    }
    x
}

/// Numerically stable log(sum(exp(v))).
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// 64-point Gauss-Legendre nodes and weights on [-1, 1], generated by
/// Newton iteration on the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrate f over [a, b] with a fixed 64-point Gauss-Legendre rule.
pub fn integrate_gl64(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gauss_legendre(64);
    let c = (b - a) / 2.0;
    let d = (b + a) / 2.0;
    nodes
        .iter()
        .zip(&weights)
        .map(|(&x, &w)| w * f(c * x + d))
        .sum::<f64>()
        * c
}
