//! Small numerical-statistics helpers: standard normal CDF/quantile and a
//! numerically stable logistic function.

use crate::scalar::Scalar;

/// Two-sided 95% critical value, fixed to six decimals so that reported
/// intervals are bit-reproducible across platforms.
pub const Z_95: f64 = 1.959964;

/// Standard normal density.
fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Upper tail `P(Z > x)` for large positive `x` via the Mills-ratio
/// continued fraction, evaluated backward.
fn normal_tail(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut t = 0.0;
    for k in (1..=120u32).rev() {
        t = f64::from(k) / (x + t);
    }
    normal_pdf(x) / (x + t)
}

/// Standard normal cumulative distribution function, accurate to close to
/// machine precision. Uses the Taylor-type series
/// `Phi(x) = 1/2 + pdf(x) * sum x^(2k+1) / (2k+1)!!` in the bulk and the
/// Mills-ratio continued fraction in the far tails.
pub fn normal_cdf(x: f64) -> f64 {
    let z = x.abs();
    if z > 8.0 {
        let tail = normal_tail(z);
        return if x > 0.0 { 1.0 - tail } else { tail };
    }
    let mut term = x;
    let mut sum = x;
    let x2 = x * x;
    for k in 1..200 {
        term *= x2 / (2.0 * k as f64 + 1.0);
        sum += term;
        if term.abs() < sum.abs() * 1e-18 + 1e-300 {
            break;
        }
    }
    (0.5 + normal_pdf(x) * sum).clamp(0.0, 1.0)
}

/// Standard normal quantile (Acklam's rational approximation, relative
/// error ~1.15e-9). `p` must lie strictly inside (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1), got {p}");

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
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
    const P_LOW: f64 = 0.02425;

    let approx = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // One Newton step against the accurate CDF tightens the rational
    // approximation to near machine precision.
    let density = normal_pdf(approx);
    if density > 1e-240 {
        approx - (normal_cdf(approx) - p) / density
    } else {
        approx
    }
}

/// Critical value for a two-sided interval at the given confidence level.
/// The default 95% level returns the fixed [`Z_95`] constant.
pub fn critical_value(level: f64) -> f64 {
    assert!(level > 0.0 && level < 1.0, "confidence level must be in (0,1)");
    if level == 0.95 {
        Z_95
    } else {
        normal_quantile(0.5 + level / 2.0)
    }
}

/// Logistic function computed branch-by-sign so neither branch ever
/// exponentiates a large positive argument.
pub fn expit<F: Scalar>(t: F) -> F {
    if t >= F::zero() {
        F::one() / (F::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (F::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values: Abramowitz & Stegun table 26.1 / any statistics
    // package (pnorm, qnorm).
    #[test]
    fn cdf_matches_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
        assert!((normal_cdf(-1.0) - 0.158_655_253_931_457_1).abs() < 1e-12);
        assert!((normal_cdf(2.0) - 0.977_249_868_051_820_8).abs() < 1e-12);
        assert!((normal_cdf(3.0) - 0.998_650_101_968_369_9).abs() < 1e-12);
        assert!((normal_cdf(1.959964) - 0.975).abs() < 1e-8);
        // Upper tail: 1 - cdf(5) = 2.866515718791939e-07.
        let tail5 = 1.0 - normal_cdf(5.0);
        assert!((tail5 / 2.866_515_718_791_939e-7 - 1.0).abs() < 1e-9);
        // Far tails stay inside [0, 1] and keep relative accuracy.
        let tail10 = normal_cdf(-10.0);
        assert!((tail10 / 7.619_853_024_160_526e-24 - 1.0).abs() < 1e-9);
        assert!(normal_cdf(40.0) <= 1.0);
        assert!(normal_cdf(-40.0) >= 0.0);
    }

    #[test]
    fn quantile_matches_reference_values() {
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((normal_quantile(0.5) - 0.0).abs() < 1e-12);
        assert!((normal_quantile(0.841_344_746_068_542_9) - 1.0).abs() < 1e-9);
        assert!((normal_quantile(0.005) + 2.575_829_303_548_901).abs() < 1e-9);
    }

    #[test]
    fn quantile_and_cdf_are_inverse() {
        for &p in &[0.001, 0.025, 0.2, 0.5, 0.8, 0.975, 0.999] {
            assert!((normal_cdf(normal_quantile(p)) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn default_critical_value_is_fixed() {
        assert_eq!(critical_value(0.95), 1.959964);
        assert!((critical_value(0.9) - 1.644_853_626_951).abs() < 1e-6);
    }

    #[test]
    fn expit_is_stable_at_extremes() {
        assert_eq!(expit(800.0f64), 1.0);
        assert_eq!(expit(-800.0f64), 0.0);
        assert!((expit(0.0f64) - 0.5).abs() < 1e-15);
        let x: f32 = expit(10.0f32);
        assert!(x > 0.9999 && x <= 1.0);
        // Symmetry: expit(-t) = 1 - expit(t).
        for &t in &[0.1f64, 1.0, 3.5, 20.0] {
            assert!((expit(-t) - (1.0 - expit(t))).abs() < 1e-15);
        }
    }
}
