//! Shared test oracles, independent of the library implementation.
//!
//! The normal CDF here is computed by numeric quadrature and the quantile by
//! bisection against it, so they share no code path with the shipped
//! rational-approximation routines they are used to check.

#![allow(dead_code)]

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF by composite Simpson integration of the density
/// from 0 to |x|. Step size keeps the quadrature error far below 1e-10.
pub fn normal_cdf_oracle(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - normal_cdf_oracle(-x);
    }
    let upper = x.min(12.0);
    let steps = ((upper / 1e-3).ceil() as usize).max(2);
    let steps = steps + steps % 2; // Simpson needs an even count
    let h = upper / steps as f64;
    let mut sum = normal_pdf(0.0) + normal_pdf(upper);
    for i in 1..steps {
        let w = if i % 2 == 0 { 2.0 } else { 4.0 };
        sum += w * normal_pdf(i as f64 * h);
    }
    0.5 + sum * h / 3.0
}

/// Inverse of `normal_cdf_oracle` by bisection.
pub fn normal_quantile_oracle(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    let (mut lo, mut hi) = (-12.0_f64, 12.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf_oracle(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sample mean, for hand-rolled checks.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor n-1), for hand-rolled checks.
pub fn sample_stddev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}
