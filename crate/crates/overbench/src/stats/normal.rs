//! Standard-normal CDF and quantile without external math dependencies.
//!
//! The CDF goes through the regularized incomplete gamma function (series
//! plus Lentz continued fraction), good to about 1e-14. The quantile uses
//! Peter Acklam's rational approximation as an initial guess, then one
//! Halley step against that CDF, which keeps `|cdf(quantile(p)) - p|`
//! orders of magnitude inside the 1e-6 contract.

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
// ln Gamma(1/2) = ln sqrt(pi)
const LN_GAMMA_HALF: f64 = 0.572_364_942_924_700_1;

/// Regularized lower incomplete gamma P(1/2, x) by series, for x < 1.5.
fn gamma_p_half_series(x: f64) -> f64 {
    let a = 0.5;
    let mut term_denom = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..200 {
        term_denom += 1.0;
        del *= x / term_denom;
        sum += del;
        if del.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - LN_GAMMA_HALF).exp()
}

/// Regularized upper incomplete gamma Q(1/2, x) by Lentz continued fraction,
/// for x >= 1.5.
fn gamma_q_half_cf(x: f64) -> f64 {
    let a = 0.5;
    const FPMIN: f64 = 1.0e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..200 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-x + a * x.ln() - LN_GAMMA_HALF).exp()
}

/// erfc(z) for z >= 0, precise in the far tail.
fn erfc_nonneg(z: f64) -> f64 {
    if z == 0.0 {
        return 1.0;
    }
    let x = z * z;
    if x < 1.5 {
        1.0 - gamma_p_half_series(x)
    } else {
        gamma_q_half_cf(x)
    }
}

/// Standard normal cumulative distribution function (erf-based, accurate to
/// roughly 1e-14).
pub fn normal_cdf(x: f64) -> f64 {
    let z = -x / SQRT_2;
    if z >= 0.0 {
        0.5 * erfc_nonneg(z)
    } else {
        0.5 * (2.0 - erfc_nonneg(-z))
    }
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

// Acklam coefficients, central region |p - 0.5| <= 0.47575.
#[allow(clippy::excessive_precision)]
const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
// Tail region p < 0.02425.
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

const TAIL_SPLIT: f64 = 0.02425;

/// Acklam initial guess for p in (0, 0.5].
fn acklam_lower_half(p: f64) -> f64 {
    if p < TAIL_SPLIT {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// One Halley step of x against `normal_cdf(x) - p`.
fn halley_refine(x: f64, p: f64) -> f64 {
    let f = normal_cdf(x) - p;
    let d = normal_pdf(x);
    if d == 0.0 {
        return x;
    }
    let u = f / d;
    // cdf'' / cdf' = -x, so the Halley correction is u / (1 + x*u/2).
    x - u / (1.0 + 0.5 * x * u)
}

/// Inverse standard-normal CDF.
///
/// Antisymmetric by construction: values for p > 0.5 are computed as the
/// negated quantile of 1 - p.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "quantile probability must lie in (0, 1), got {p}"
        )));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        return Ok(-normal_quantile(1.0 - p)?);
    }
    Ok(halley_refine(acklam_lower_half(p), p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_of_half_is_zero() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
    }

    #[test]
    fn frozen_reference_quantiles() {
        // z_{0.995} and z_{0.99}, frozen from the bisection oracle in
        // tests/common (see tests/stats_oracle.rs for the live comparison).
        assert!((normal_quantile(0.995).unwrap() - 2.575829).abs() < 1e-4);
        assert!((normal_quantile(0.99).unwrap() - 2.326348).abs() < 1e-4);
        assert!((normal_quantile(0.975).unwrap() - 1.959964).abs() < 1e-4);
    }

    #[test]
    fn quantile_is_antisymmetric() {
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let a = normal_quantile(p).unwrap();
            let b = normal_quantile(1.0 - p).unwrap();
            assert!((a + b).abs() < 1e-9, "p={p}: {a} vs {b}");
        }
    }

    #[test]
    fn quantile_rejects_out_of_domain() {
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
        assert!(normal_quantile(-0.2).is_err());
        assert!(normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn cdf_matches_known_points() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.0) - 0.8413447460685429).abs() < 1e-12);
        assert!((normal_cdf(-1.96) - 0.024997895148220435).abs() < 1e-12);
        assert!((normal_cdf(3.0) - 0.9986501019683699).abs() < 1e-12);
    }
}
