//! Synthetic data-generating process, its exact ground truths, and the Monte
//! Carlo harness used to study the estimators' sampling behaviour.
//!
//! The process draws two independent uniform covariates on (-1, 1), assigns
//! treatment with a mildly covariate-dependent propensity, and adds a unit
//! normal outcome error around a nonlinear baseline plus a heterogeneous
//! effect:
//!
//! ```text
//! tau(x)  = x1^3 + 1.4 x1^2 + (25/9) x2^2
//! pi(x)   = expit(-0.4 x1 + 0.1 x1 x2)
//! m0(x)   = x1 x2 + 2 x2^2 - x1
//! Y       = m0(X) + A tau(X) + N(0, 1)
//! ```
//!
//! The effect is additive in `x1` and `x2`, so every population quantity the
//! estimators target (average effect, effect variance, per-covariate shares)
//! has a closed conditional structure that tensor-product midpoint quadrature
//! pins down to ~1e-6.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::crossfit::{run_algorithm, AlgorithmConfig, AlgorithmId, PerObservationEstimates};
use crate::data::{io_of, CovariateSubset, Dataset, Mode};
use crate::error::{Error, Result};
use crate::estimands;
use crate::learners::LearnerSpec;
use crate::nuisance::PropensitySpec;
use crate::scalar::Scalar;
use crate::seed::{self, stage};
use crate::stats;

/// The treatment effect surface.
pub fn dgp_cate<F: Scalar>(x1: F, x2: F) -> F {
    let c = F::from_f64_lossy(25.0 / 9.0);
    x1 * x1 * (x1 + F::from_f64_lossy(1.4)) + c * x2 * x2
}

/// The treatment-assignment probability.
pub fn dgp_propensity<F: Scalar>(x1: F, x2: F) -> F {
    stats::expit(F::from_f64_lossy(-0.4) * x1 + F::from_f64_lossy(0.1) * x1 * x2)
}

/// The untreated mean outcome.
pub fn dgp_baseline<F: Scalar>(x1: F, x2: F) -> F {
    x1 * x2 + F::from_f64_lossy(2.0) * x2 * x2 - x1
}

/// Conditional mean effect given `x2` alone (what remains when `x1` is
/// dropped): `7/15 + (25/9) x2^2`.
pub fn dgp_cate_given_x2<F: Scalar>(x2: F) -> F {
    F::from_f64_lossy(7.0 / 15.0) + F::from_f64_lossy(25.0 / 9.0) * x2 * x2
}

/// Conditional mean effect given `x1` alone: `x1^3 + 1.4 x1^2 + 25/27`.
pub fn dgp_cate_given_x1<F: Scalar>(x1: F) -> F {
    x1 * x1 * (x1 + F::from_f64_lossy(1.4)) + F::from_f64_lossy(25.0 / 27.0)
}

/// One draw from the process, with the oracle columns kept alongside.
#[derive(Debug, Clone)]
pub struct DgpSample<F: Scalar> {
    pub data: Dataset<F>,
    /// True effect tau(x_i) per row.
    pub cate: Vec<F>,
    /// True assignment probability per row.
    pub propensity: Vec<F>,
    /// True untreated mean per row.
    pub baseline: Vec<F>,
}

/// Draws `n` rows. Per row the generator consumes exactly four variates in a
/// fixed order (x1, x2, assignment uniform, outcome normal), so samples are
/// reproducible from the seed alone.
pub fn generate_dgp<F: Scalar>(n: usize, seed: u64) -> Result<DgpSample<F>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut covariates = Array2::<F>::zeros((n, 2));
    let mut outcome = Vec::with_capacity(n);
    let mut treatment = Vec::with_capacity(n);
    let mut cate = Vec::with_capacity(n);
    let mut propensity = Vec::with_capacity(n);
    let mut baseline = Vec::with_capacity(n);
    let one = F::one();
    for i in 0..n {
        let x1 = F::uniform(&mut rng, -one, one);
        let x2 = F::uniform(&mut rng, -one, one);
        let assign = F::uniform(&mut rng, F::zero(), one);
        let noise = F::standard_normal(&mut rng);
        let pi = dgp_propensity(x1, x2);
        let tau = dgp_cate(x1, x2);
        let base = dgp_baseline(x1, x2);
        let a = if assign < pi { one } else { F::zero() };
        covariates[(i, 0)] = x1;
        covariates[(i, 1)] = x2;
        outcome.push(base + a * tau + noise);
        treatment.push(a);
        cate.push(tau);
        propensity.push(pi);
        baseline.push(base);
    }
    let data = Dataset::new(
        outcome,
        treatment,
        covariates,
        vec!["x1".into(), "x2".into()],
        Mode::Binary,
    )?;
    Ok(DgpSample { data, cate, propensity, baseline })
}

/// Population quantities of the process, from tensor-product midpoint
/// quadrature with `resolution` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truths {
    pub ate: f64,
    pub vte: f64,
    /// Unscaled heterogeneity lost when x1 is dropped.
    pub theta1: f64,
    /// Unscaled heterogeneity lost when x2 is dropped.
    pub theta2: f64,
    pub psi1: f64,
    pub psi2: f64,
    /// vte / ate^2.
    pub negative_effect_bound: f64,
    pub resolution: usize,
}

/// Computes [`Truths`]. The outcome noise and the propensity play no role:
/// every target is a functional of the effect surface alone. Requires at
/// least 1000 nodes per axis, which keeps the quadrature error near 1e-6.
pub fn true_values(resolution: usize) -> Result<Truths> {
    if resolution < 1000 {
        return Err(Error::InvalidConfig(format!(
            "quadrature needs at least 1000 nodes per axis, got {resolution}"
        )));
    }
    let m = resolution;
    let step = 2.0 / m as f64;
    let nodes: Vec<f64> = (0..m).map(|i| -1.0 + (i as f64 + 0.5) * step).collect();

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    // row_sum[i]: effect summed over x2 for fixed x1 = nodes[i];
    // col_sum[j]: summed over x1 for fixed x2 = nodes[j].
    let mut row_sum = vec![0.0; m];
    let mut col_sum = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            let tau = dgp_cate(nodes[i], nodes[j]);
            sum += tau;
            sum_sq += tau * tau;
            row_sum[i] += tau;
            col_sum[j] += tau;
        }
    }
    let cells = (m * m) as f64;
    let ate = sum / cells;
    let second_moment = sum_sq / cells;
    let vte = second_moment - ate * ate;
    // Dropping x1 leaves E(tau | x2); by the law of total variance the lost
    // heterogeneity is E(tau^2) - E[E(tau | x2)^2]. Same for x2.
    let mean_cond_sq =
        |sums: &[f64]| sums.iter().map(|s| (s / m as f64).powi(2)).sum::<f64>() / m as f64;
    let theta1 = second_moment - mean_cond_sq(&col_sum);
    let theta2 = second_moment - mean_cond_sq(&row_sum);
    Ok(Truths {
        ate,
        vte,
        theta1,
        theta2,
        psi1: theta1 / vte,
        psi2: theta2 / vte,
        negative_effect_bound: vte / (ate * ate),
        resolution,
    })
}

/// One replicate's estimate for one metric cell: point value and raw
/// confidence limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOutcome {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Aggregated sampling metrics for one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McStats {
    /// sqrt(n) times the mean estimation error.
    pub scaled_bias: f64,
    /// n times the sample variance of the estimates.
    pub scaled_variance: f64,
    /// Fraction of raw intervals containing the truth.
    pub coverage: f64,
    pub successes: usize,
    pub failures: usize,
}

/// Aggregates one cell's replicate outcomes (`None` marks a failed
/// replicate, which is counted and excluded).
pub fn aggregate(outcomes: &[Option<McOutcome>], truth: f64, n: usize) -> McStats {
    let values: Vec<&McOutcome> = outcomes.iter().flatten().collect();
    let successes = values.len();
    let failures = outcomes.len() - successes;
    if successes == 0 {
        return McStats {
            scaled_bias: 0.0,
            scaled_variance: 0.0,
            coverage: 0.0,
            successes,
            failures,
        };
    }
    let mean = values.iter().map(|o| o.value).sum::<f64>() / successes as f64;
    let variance = if successes > 1 {
        values.iter().map(|o| (o.value - mean).powi(2)).sum::<f64>() / (successes - 1) as f64
    } else {
        0.0
    };
    let covered = values.iter().filter(|o| o.lo <= truth && truth <= o.hi).count();
    McStats {
        scaled_bias: (n as f64).sqrt() * (mean - truth),
        scaled_variance: n as f64 * variance,
        coverage: covered as f64 / successes as f64,
        successes,
        failures,
    }
}

/// The study design: which run flavours, learners, and sample sizes to cross.
/// Every cell scores the two singleton subsets {1} and {2}.
#[derive(Debug, Clone)]
pub struct McGrid {
    pub sample_sizes: Vec<usize>,
    pub algorithms: Vec<AlgorithmId>,
    /// (label, spec) pairs; the spec drives all four learner roles.
    pub learners: Vec<(String, LearnerSpec)>,
    pub folds: usize,
    pub clip: f64,
}

/// One metrics row: a (variant, learner, n, subset) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub variant: String,
    pub learner: String,
    pub n: usize,
    pub subset: String,
    pub scaled_bias: f64,
    pub scaled_variance: f64,
    pub coverage: f64,
    /// Successful replicates the metrics are computed over.
    pub replicates: usize,
    pub failures: usize,
}

/// Runs the full study. Replicates are independent and run in parallel; the
/// dataset and the fold/learner seeds for replicate r depend only on
/// (master_seed, n, r), so every variant and learner sees the *same* data
/// and fold randomness — paired comparisons across cells are exact.
pub fn monte_carlo(
    grid: &McGrid,
    replicates: usize,
    master_seed: u64,
    truths: &Truths,
) -> Result<Vec<McRow>> {
    if replicates == 0 {
        return Err(Error::InvalidConfig("need at least one replicate".into()));
    }
    let subset1 = CovariateSubset::new(&[1], 2)?;
    let subset2 = CovariateSubset::new(&[2], 2)?;
    let subsets = [subset1, subset2];
    let z = stats::Z_95;

    let mut rows = Vec::new();
    for &n in &grid.sample_sizes {
        // cells: algorithm-major, then learner, then subset.
        let outcomes: Vec<Vec<Option<McOutcome>>> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let data_seed =
                    seed::derive(master_seed, &[stage::DATA, n as u64, r as u64]);
                let algo_seed =
                    seed::derive(master_seed, &[stage::ALGORITHM, n as u64, r as u64]);
                let cell_count = grid.algorithms.len() * grid.learners.len() * subsets.len();
                let sample = match generate_dgp::<f64>(n, data_seed) {
                    Ok(sample) => sample,
                    Err(_) => return vec![None; cell_count],
                };
                let mut cells = Vec::with_capacity(cell_count);
                for id in &grid.algorithms {
                    for (_, spec) in &grid.learners {
                        let cfg = AlgorithmConfig {
                            split: id.sample_split(grid.folds),
                            variant: id.variant,
                            subsets: subsets.to_vec(),
                            outcome_spec: spec.clone(),
                            propensity_spec: PropensitySpec::Learner(spec.clone()),
                            cate_spec: spec.clone(),
                            subset_spec: spec.clone(),
                            clip: grid.clip,
                            seed: algo_seed,
                        };
                        match run_algorithm(&sample.data, &cfg) {
                            Ok(est) => {
                                for subset in &subsets {
                                    let cell = estimands::tevim(
                                        subset,
                                        &est.pseudo,
                                        &est.cate,
                                        &est.subset_cates[subset],
                                        &est.mean_cate,
                                        z,
                                    )
                                    .ok()
                                    .map(|t| McOutcome {
                                        value: t.value,
                                        lo: t.ci_raw.0,
                                        hi: t.ci_raw.1,
                                    });
                                    cells.push(cell);
                                }
                            }
                            Err(_) => {
                                cells.push(None);
                                cells.push(None);
                            }
                        }
                    }
                }
                cells
            })
            .collect();

        let mut cell_idx = 0;
        for id in &grid.algorithms {
            for (label, _) in &grid.learners {
                for (s, subset) in subsets.iter().enumerate() {
                    let column: Vec<Option<McOutcome>> =
                        outcomes.iter().map(|rep| rep[cell_idx]).collect();
                    let truth = if s == 0 { truths.psi1 } else { truths.psi2 };
                    let stats = aggregate(&column, truth, n);
                    rows.push(McRow {
                        variant: id.to_string(),
                        learner: label.clone(),
                        n,
                        subset: subset.to_string(),
                        scaled_bias: stats.scaled_bias,
                        scaled_variance: stats.scaled_variance,
                        coverage: stats.coverage,
                        replicates: stats.successes,
                        failures: stats.failures,
                    });
                    cell_idx += 1;
                }
            }
        }
    }
    Ok(rows)
}

/// One replicate's raw estimates under a caller-supplied estimator; used to
/// study estimators the standard grid does not cover (oracle nuisances,
/// custom configurations).
#[derive(Debug, Clone)]
pub struct ReplicateSummary {
    pub replicate: usize,
    pub ate: f64,
    /// Raw effect-variance estimate.
    pub vte: f64,
    /// Unscaled theta per non-full subset.
    pub theta: BTreeMap<CovariateSubset, f64>,
    /// Share estimate with raw confidence limits per non-full subset.
    pub psi: BTreeMap<CovariateSubset, McOutcome>,
}

/// Runs `estimator` on fresh draws using the same seed schedule as
/// [`monte_carlo`], returning per-replicate estimates in replicate order.
/// The estimator receives the sample (with oracle columns) and the seed a
/// standard run would use.
pub fn monte_carlo_with<E>(
    n: usize,
    replicates: usize,
    master_seed: u64,
    estimator: E,
) -> Vec<Result<ReplicateSummary>>
where
    E: Fn(&DgpSample<f64>, u64) -> Result<PerObservationEstimates<f64>> + Sync,
{
    let z = stats::Z_95;
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let data_seed = seed::derive(master_seed, &[stage::DATA, n as u64, r as u64]);
            let algo_seed =
                seed::derive(master_seed, &[stage::ALGORITHM, n as u64, r as u64]);
            let sample = generate_dgp::<f64>(n, data_seed)?;
            let est = estimator(&sample, algo_seed)?;
            let ate = estimands::ate(&est.pseudo, z)?.value;
            let vte = estimands::vte(&est.pseudo, &est.cate, &est.mean_cate, z)?
                .estimate
                .value;
            let mut theta = BTreeMap::new();
            let mut psi = BTreeMap::new();
            for (subset, tau_s) in &est.subset_cates {
                if subset.is_full() {
                    continue;
                }
                theta.insert(
                    subset.clone(),
                    estimands::tevim_unscaled(&est.pseudo, &est.cate, tau_s),
                );
                let t = estimands::tevim(
                    subset,
                    &est.pseudo,
                    &est.cate,
                    tau_s,
                    &est.mean_cate,
                    z,
                )?;
                psi.insert(
                    subset.clone(),
                    McOutcome { value: t.value, lo: t.ci_raw.0, hi: t.ci_raw.1 },
                );
            }
            Ok(ReplicateSummary { replicate: r, ate, vte, theta, psi })
        })
        .collect()
}

/// Writes metric rows as CSV with a fixed header. Floats are printed in
/// shortest round-trip form, so identical rows serialize identically.
pub fn write_metrics_csv(rows: &[McRow], path: &Path) -> Result<()> {
    let io_err = |e: csv::Error| Error::Io {
        path: path.display().to_string(),
        source: io_of(e),
    };
    let mut writer = csv::Writer::from_path(path).map_err(io_err)?;
    writer
        .write_record([
            "variant",
            "learner",
            "n",
            "subset",
            "scaled_bias",
            "scaled_variance",
            "coverage",
            "replicates",
            "failures",
        ])
        .map_err(io_err)?;
    for row in rows {
        writer
            .write_record(&[
                row.variant.clone(),
                row.learner.clone(),
                row.n.to_string(),
                row.subset.clone(),
                format!("{}", row.scaled_bias),
                format!("{}", row.scaled_variance),
                format!("{}", row.coverage),
                row.replicates.to_string(),
                row.failures.to_string(),
            ])
            .map_err(io_err)?;
    }
    writer
        .flush()
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}
