//! One-step estimators and Wald inference built on the per-observation
//! estimates.
//!
//! The heterogeneity attributable to a covariate subset `s` is measured on
//! two scales. Unscaled, it is the mean squared gap the subset leaves behind,
//!
//! ```text
//! theta_s = n^-1 sum_i [ (phi_i - tau_s_i)^2 - (phi_i - tau_i)^2 ],
//! ```
//!
//! and scaled it is the share `psi_s = theta_s / theta_full` of the total
//! effect variance. Every estimator here is a sample average plus the sample
//! average of its influence values, so standard errors come from the
//! empirical second moment of those influence values.

use std::collections::BTreeSet;

use crate::crossfit::{make_folds, run_algorithm, AlgorithmConfig, PerObservationEstimates};
use crate::data::{CovariateSubset, Dataset, Mode};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::{self, stage};
use crate::stats;

fn check_aligned<F: Scalar>(vectors: &[&[F]]) -> Result<usize> {
    let n = vectors.first().map_or(0, |v| v.len());
    if n == 0 {
        return Err(Error::InvalidData("estimator input is empty".into()));
    }
    if vectors.iter().any(|v| v.len() != n) {
        return Err(Error::InvalidData(
            "estimator inputs have mismatched lengths".into(),
        ));
    }
    Ok(n)
}

fn mean<F: Scalar>(values: &[F]) -> F {
    let mut sum = F::zero();
    for &v in values {
        sum += v;
    }
    sum / F::from_usize(values.len()).unwrap()
}

/// Two-sided p-value for `value / se` against a standard normal. A zero
/// standard error means the estimate is exact: p is 1 when the value is 0 and
/// 0 otherwise.
fn two_sided_p<F: Scalar>(value: F, se: F) -> F {
    if se > F::zero() {
        let z = (value / se).to_f64_lossy().abs();
        F::from_f64_lossy(2.0 * stats::normal_cdf(-z))
    } else if value == F::zero() {
        F::one()
    } else {
        F::zero()
    }
}

/// One-sided upper p-value: evidence that the parameter exceeds zero.
fn one_sided_upper_p<F: Scalar>(value: F, se: F) -> F {
    if se > F::zero() {
        let z = (value / se).to_f64_lossy();
        F::from_f64_lossy(stats::normal_cdf(-z))
    } else if value > F::zero() {
        F::zero()
    } else {
        F::one()
    }
}

fn clamp01<F: Scalar>(x: F) -> F {
    x.max(F::zero()).min(F::one())
}

/// Point estimate with influence-curve Wald inference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarEstimate<F: Scalar> {
    pub value: F,
    /// Estimated variance of the estimator (already divided by n).
    pub variance: F,
    pub se: F,
    pub ci: (F, F),
    pub p_value: F,
}

/// Unscaled heterogeneity attributable to `subset`:
/// `n^-1 sum_i [(phi_i - tau_s_i)^2 - (phi_i - tau_i)^2]`.
pub fn tevim_unscaled<F: Scalar>(pseudo: &[F], cate: &[F], subset_cate: &[F]) -> F {
    let n = pseudo.len();
    let mut sum = F::zero();
    for i in 0..n {
        let gap_s = pseudo[i] - subset_cate[i];
        let gap = pseudo[i] - cate[i];
        sum += gap_s * gap_s - gap * gap;
    }
    sum / F::from_usize(n).unwrap()
}

/// The scaled importance estimate for one subset, with inference.
#[derive(Debug, Clone, PartialEq)]
pub struct TevimEstimate<F: Scalar> {
    pub subset: CovariateSubset,
    /// Unscaled numerator (theta for this subset).
    pub unscaled: F,
    /// Denominator: the effect-variance estimate (theta for the full set).
    pub vte: F,
    /// The share `unscaled / vte`.
    pub value: F,
    pub variance: F,
    pub se: F,
    /// Untruncated Wald interval.
    pub ci_raw: (F, F),
    /// The same interval clamped into [0, 1], the parameter's natural range.
    pub ci_truncated: (F, F),
    /// Two-sided p-value against share = 0.
    pub p_value: F,
    pub n: usize,
    /// Set when the effect-variance estimate came out negative; the share is
    /// reported raw but is unreliable.
    pub negative_vte: bool,
}

/// Estimates the heterogeneity share for one subset. Errors when the
/// effect-variance estimate is exactly zero (the share is undefined).
pub fn tevim<F: Scalar>(
    subset: &CovariateSubset,
    pseudo: &[F],
    cate: &[F],
    subset_cate: &[F],
    mean_cate: &[F],
    z: F,
) -> Result<TevimEstimate<F>> {
    let n = check_aligned(&[pseudo, cate, subset_cate, mean_cate])?;
    let nf = F::from_usize(n).unwrap();
    let theta_s = tevim_unscaled(pseudo, cate, subset_cate);
    let theta_p = tevim_unscaled(pseudo, cate, mean_cate);
    if theta_p == F::zero() {
        return Err(Error::Estimation(
            "the effect-variance estimate is exactly zero, so heterogeneity shares \
             are undefined"
                .into(),
        ));
    }
    let psi = theta_s / theta_p;

    // Influence values of the ratio: with u = (phi - tau_s)^2,
    // v = (phi - tau_p)^2, w = (phi - tau)^2, each observation contributes
    // [u - psi*v + (psi - 1)*w] / theta_p. Their mean is
    // (theta_s - psi * theta_p) / theta_p = 0, so no further centering.
    let mut sum_sq = F::zero();
    for i in 0..n {
        let gap_s = pseudo[i] - subset_cate[i];
        let gap_p = pseudo[i] - mean_cate[i];
        let gap = pseudo[i] - cate[i];
        let u = gap_s * gap_s;
        let v = gap_p * gap_p;
        let w = gap * gap;
        let ic = (u - psi * v + (psi - F::one()) * w) / theta_p;
        sum_sq += ic * ic;
    }
    let variance = sum_sq / (nf * nf);
    let se = variance.sqrt();
    let ci_raw = (psi - z * se, psi + z * se);
    Ok(TevimEstimate {
        subset: subset.clone(),
        unscaled: theta_s,
        vte: theta_p,
        value: psi,
        variance,
        se,
        ci_raw,
        ci_truncated: (clamp01(ci_raw.0), clamp01(ci_raw.1)),
        p_value: two_sided_p(psi, se),
        n,
        negative_vte: theta_p < F::zero(),
    })
}

/// Average treatment effect: the mean pseudo-outcome, with a two-sided test
/// against zero.
pub fn ate<F: Scalar>(pseudo: &[F], z: F) -> Result<ScalarEstimate<F>> {
    let n = check_aligned(&[pseudo])?;
    let nf = F::from_usize(n).unwrap();
    let value = mean(pseudo);
    let mut sum_sq = F::zero();
    for &phi in pseudo {
        let d = phi - value;
        sum_sq += d * d;
    }
    let variance = sum_sq / (nf * nf);
    let se = variance.sqrt();
    Ok(ScalarEstimate {
        value,
        variance,
        se,
        ci: (value - z * se, value + z * se),
        p_value: two_sided_p(value, se),
    })
}

/// Variance of the treatment effect (the full-set theta), with derived
/// square-root quantities for reporting on the effect scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VteEstimate<F: Scalar> {
    /// The raw estimate; its p-value is one-sided (evidence of any
    /// heterogeneity at all).
    pub estimate: ScalarEstimate<F>,
    /// `sqrt(max(value, 0))` — the effect-scale standard deviation.
    pub root_value: F,
    /// The confidence limits pushed through the same square root.
    pub root_ci: (F, F),
    /// Set when the raw estimate fell below zero.
    pub negative: bool,
}

/// Estimates the variance of the treatment effect.
pub fn vte<F: Scalar>(pseudo: &[F], cate: &[F], mean_cate: &[F], z: F) -> Result<VteEstimate<F>> {
    let n = check_aligned(&[pseudo, cate, mean_cate])?;
    let nf = F::from_usize(n).unwrap();
    let value = tevim_unscaled(pseudo, cate, mean_cate);
    let mut sum_sq = F::zero();
    for i in 0..n {
        let gap_p = pseudo[i] - mean_cate[i];
        let gap = pseudo[i] - cate[i];
        let ic = gap_p * gap_p - gap * gap - value;
        sum_sq += ic * ic;
    }
    let variance = sum_sq / (nf * nf);
    let se = variance.sqrt();
    let ci = (value - z * se, value + z * se);
    let root = |x: F| x.max(F::zero()).sqrt();
    Ok(VteEstimate {
        estimate: ScalarEstimate {
            value,
            variance,
            se,
            ci,
            p_value: one_sided_upper_p(value, se),
        },
        root_value: root(value),
        root_ci: (root(ci.0), root(ci.1)),
        negative: value < F::zero(),
    })
}

/// Variance of the subset-CATE itself, `var(tau_s)`: how much heterogeneity
/// the complement covariates explain. Its value plus the subset's unscaled
/// theta equals the full effect variance by construction.
pub fn subset_cate_variance<F: Scalar>(
    pseudo: &[F],
    subset_cate: &[F],
    mean_cate: &[F],
    z: F,
) -> Result<ScalarEstimate<F>> {
    let n = check_aligned(&[pseudo, subset_cate, mean_cate])?;
    let nf = F::from_usize(n).unwrap();
    let mut sum = F::zero();
    for i in 0..n {
        let gap_p = pseudo[i] - mean_cate[i];
        let gap_s = pseudo[i] - subset_cate[i];
        sum += gap_p * gap_p - gap_s * gap_s;
    }
    let value = sum / nf;
    let mut sum_sq = F::zero();
    for i in 0..n {
        let gap_p = pseudo[i] - mean_cate[i];
        let gap_s = pseudo[i] - subset_cate[i];
        let ic = gap_p * gap_p - gap_s * gap_s - value;
        sum_sq += ic * ic;
    }
    let variance = sum_sq / (nf * nf);
    let se = variance.sqrt();
    Ok(ScalarEstimate {
        value,
        variance,
        se,
        ci: (value - z * se, value + z * se),
        p_value: one_sided_upper_p(value, se),
    })
}

/// Chebyshev-style upper bound on the share of the population with a
/// treatment effect at or below zero: effect variance over squared average
/// effect. Defined only when the average effect is positive.
pub fn negative_cate_bound<F: Scalar>(
    pseudo: &[F],
    cate: &[F],
    mean_cate: &[F],
    z: F,
) -> Result<ScalarEstimate<F>> {
    let n = check_aligned(&[pseudo, cate, mean_cate])?;
    let nf = F::from_usize(n).unwrap();
    let tau_p = mean(pseudo);
    if tau_p <= F::zero() {
        return Err(Error::Estimation(format!(
            "the average effect estimate ({}) is not positive, so the \
             negative-effect bound is undefined",
            tau_p.to_f64_lossy()
        )));
    }
    let theta_p = tevim_unscaled(pseudo, cate, mean_cate);
    let value = theta_p / (tau_p * tau_p);

    // Influence values: the per-fold average effect centers the squared
    // terms, while the overall mean pseudo-outcome centers the denominator
    // correction. The correction's sample average telescopes to
    // value * tau_p^2 exactly, so these influence values average to zero.
    let mut sum_sq = F::zero();
    let two = F::from_f64_lossy(2.0);
    for i in 0..n {
        let gap_p = pseudo[i] - mean_cate[i];
        let gap = pseudo[i] - cate[i];
        let correction = value * tau_p * (two * pseudo[i] - tau_p);
        let ic = (gap_p * gap_p - gap * gap - correction) / (tau_p * tau_p);
        sum_sq += ic * ic;
    }
    let variance = sum_sq / (nf * nf);
    let se = variance.sqrt();
    Ok(ScalarEstimate {
        value,
        variance,
        se,
        ci: (value - z * se, value + z * se),
        p_value: one_sided_upper_p(value, se),
    })
}

/// One subset's split-sample test of "this subset carries no heterogeneity".
#[derive(Debug, Clone, PartialEq)]
pub struct NullTestResult<F: Scalar> {
    pub subset: CovariateSubset,
    /// Standardized difference between the first half's effect-variance
    /// estimate and the second half's complement-explained variance.
    pub statistic: F,
    /// One-sided p-value; small values are evidence of heterogeneity beyond
    /// what the complement explains.
    pub p_value: F,
    /// Effect-variance estimate from the first half.
    pub effect_variance: ScalarEstimate<F>,
    /// Complement-explained variance `var(tau_s)` from the second half.
    pub explained_variance: ScalarEstimate<F>,
    /// Row counts of the two halves.
    pub half_sizes: (usize, usize),
}

/// Split-sample test: under "subset s carries no heterogeneity" the effect
/// variance equals the variance explained by the complement, so the halves'
/// independent estimates of those two quantities should agree. The
/// standardized difference is compared to a standard normal. Valid at nominal
/// level whenever the complement-explained variance is positive; one result
/// is returned per configured subset.
pub fn split_sample_null_test<F: Scalar>(
    data: &Dataset<F>,
    cfg: &AlgorithmConfig,
    z: F,
) -> Result<Vec<NullTestResult<F>>> {
    if data.mode() != Mode::Binary {
        return Err(Error::InvalidConfig(
            "the split-sample test is implemented for binary-treatment data".into(),
        ));
    }
    if cfg.subsets.is_empty() {
        return Err(Error::InvalidConfig(
            "the split-sample test needs at least one subset to test".into(),
        ));
    }
    let halves = make_folds(data, 2, seed::derive(cfg.seed, &[stage::NULL_TEST]))?;
    let first = data.select_rows(&halves.rows_in(0));
    let second = data.select_rows(&halves.rows_in(1));

    let mut cfg_first = cfg.clone();
    cfg_first.seed = seed::derive(cfg.seed, &[stage::NULL_TEST, 1]);
    let mut cfg_second = cfg.clone();
    cfg_second.seed = seed::derive(cfg.seed, &[stage::NULL_TEST, 2]);

    let est_first = run_algorithm(&first, &cfg_first)?;
    let est_second = run_algorithm(&second, &cfg_second)?;
    let effect_variance =
        vte(&est_first.pseudo, &est_first.cate, &est_first.mean_cate, z)?.estimate;

    let requested: BTreeSet<CovariateSubset> = cfg.subsets.iter().cloned().collect();
    let mut results = Vec::with_capacity(requested.len());
    for subset in requested {
        let tau_s = est_second
            .subset_cates
            .get(&subset)
            .expect("configured subsets are always computed");
        let explained =
            subset_cate_variance(&est_second.pseudo, tau_s, &est_second.mean_cate, z)?;
        let diff = effect_variance.value - explained.value;
        let denom = (effect_variance.variance + explained.variance).sqrt();
        let statistic = if denom > F::zero() { diff / denom } else { F::zero() };
        let p_value = F::from_f64_lossy(stats::normal_cdf(-statistic.to_f64_lossy()));
        results.push(NullTestResult {
            subset,
            statistic,
            p_value,
            effect_variance,
            explained_variance: explained,
            half_sizes: (first.n(), second.n()),
        });
    }
    Ok(results)
}

/// Full per-dataset report: average effect, effect variance, the
/// negative-effect bound when defined, and one share estimate per requested
/// subset sorted most-important first.
#[derive(Debug, Clone)]
pub struct AnalysisSummary<F: Scalar> {
    pub n: usize,
    pub ate: ScalarEstimate<F>,
    pub vte: VteEstimate<F>,
    /// Present only when the average effect is positive.
    pub negative_effect_bound: Option<ScalarEstimate<F>>,
    /// Sorted by share descending; ties broken by subset order.
    pub subsets: Vec<TevimEstimate<F>>,
    pub warnings: Vec<String>,
}

/// Builds the report from one estimation pass. `requested` controls which
/// subsets are reported (the implicitly added full set stays internal unless
/// asked for).
pub fn summarize<F: Scalar>(
    estimates: &PerObservationEstimates<F>,
    requested: &[CovariateSubset],
    z: F,
) -> Result<AnalysisSummary<F>> {
    let n = estimates.pseudo.len();
    let mut warnings = Vec::new();
    let ate_est = ate(&estimates.pseudo, z)?;
    let vte_est = vte(&estimates.pseudo, &estimates.cate, &estimates.mean_cate, z)?;
    if vte_est.negative {
        warnings.push(format!(
            "the effect-variance estimate is negative ({:.6}); share estimates are \
             unreliable at this sample size",
            vte_est.estimate.value.to_f64_lossy()
        ));
    }
    let negative_effect_bound = if ate_est.value > F::zero() {
        Some(negative_cate_bound(
            &estimates.pseudo,
            &estimates.cate,
            &estimates.mean_cate,
            z,
        )?)
    } else {
        warnings.push(
            "the average effect is not positive; the negative-effect bound is omitted"
                .to_string(),
        );
        None
    };

    let unique: BTreeSet<CovariateSubset> = requested.iter().cloned().collect();
    let mut subsets = Vec::with_capacity(unique.len());
    for subset in unique {
        let tau_s = estimates.subset_cates.get(&subset).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "subset {subset} was not computed in this estimation pass"
            ))
        })?;
        subsets.push(tevim(
            &subset,
            &estimates.pseudo,
            &estimates.cate,
            tau_s,
            &estimates.mean_cate,
            z,
        )?);
    }
    subsets.sort_by(|a, b| {
        b.value
            .partial_cmp(&a.value)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.subset.cmp(&b.subset))
    });

    Ok(AnalysisSummary {
        n,
        ate: ate_est,
        vte: vte_est,
        negative_effect_bound,
        subsets,
        warnings,
    })
}
