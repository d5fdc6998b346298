//! Continuous-treatment analogue of the binary pipeline.
//!
//! With a continuous exposure the effect parameter per covariate value is the
//! conditional regression slope `lambda(x) = cov(A, Y | X=x) / var(A | X=x)`,
//! and the pseudo-outcome becomes
//!
//! ```text
//! phi_i = (y - mu(x) - lambda(x) (a - pi(x))) * (a - pi(x)) / v(x) + lambda(x)
//! ```
//!
//! with `mu(x) = E(Y|x)`, `pi(x) = E(A|x)`, `v(x) = var(A|x)`. A binary
//! treatment is the special case `mu = pi mu1 + (1-pi) mu0`, `v = pi (1-pi)`,
//! `lambda = mu1 - mu0`, under which the formula above reduces *exactly* to
//! the binary pseudo-outcome; [`ContinuousNuisance::FromBinary`] implements
//! that reduction and exists chiefly to let tests pin the equivalence down.

use ndarray::ArrayView2;

use crate::crossfit::{self, AlgorithmConfig, FoldStage, PerObservationEstimates, StageValues};
use crate::data::{Dataset, Mode};
use crate::error::{Error, Result};
use crate::estimands::{self, AnalysisSummary};
use crate::learners::{self, FittedModel, LearnerSpec};
use crate::nuisance::{self, NuisanceFits, PropensitySpec};
use crate::scalar::Scalar;
use crate::seed::{self, stage};

/// Learner choices for the four continuous-treatment nuisance regressions.
#[derive(Debug, Clone)]
pub struct ContinuousSpecs {
    /// E(Y | X).
    pub outcome: LearnerSpec,
    /// E(A | X).
    pub treatment: LearnerSpec,
    /// var(A | X), fit on squared treatment residuals.
    pub variance: LearnerSpec,
    /// cov(A, Y | X), fit on products of treatment and outcome residuals.
    pub covariance: LearnerSpec,
}

impl ContinuousSpecs {
    /// Derives the four specs from an algorithm config: the outcome learner
    /// drives the outcome, variance, and covariance regressions; the
    /// propensity spec must be an actual learner and drives the treatment
    /// regression.
    pub fn from_config(cfg: &AlgorithmConfig) -> Result<Self> {
        let treatment = match &cfg.propensity_spec {
            PropensitySpec::Learner(spec) => spec.clone(),
            PropensitySpec::KnownConstant { .. } => {
                return Err(Error::InvalidConfig(
                    "a known-constant propensity is only meaningful for binary \
                     treatments; supply a learner for E(A | X)"
                        .into(),
                ))
            }
        };
        Ok(ContinuousSpecs {
            outcome: cfg.outcome_spec.clone(),
            treatment,
            variance: cfg.outcome_spec.clone(),
            covariance: cfg.outcome_spec.clone(),
        })
    }
}

/// Per-row nuisance predictions for the continuous pseudo-outcome.
#[derive(Debug, Clone)]
pub struct ContinuousPredictions<F: Scalar> {
    pub mu: Vec<F>,
    pub pi: Vec<F>,
    /// Conditional treatment variance, already floored where applicable.
    pub variance: Vec<F>,
    /// The effect slope lambda = covariance / variance.
    pub slope: Vec<F>,
}

/// Fitted continuous-treatment nuisances.
#[derive(Debug, Clone)]
pub enum ContinuousNuisance<F: Scalar> {
    /// Four regressions fit on continuous-treatment data.
    Fitted {
        outcome: FittedModel<F>,
        treatment: FittedModel<F>,
        variance: FittedModel<F>,
        covariance: FittedModel<F>,
        /// Floor applied to variance predictions before dividing.
        floor: F,
    },
    /// A binary nuisance bundle expressed through the exact moment
    /// identities; no variance floor is applied because the propensity clip
    /// already bounds pi (1 - pi) away from zero.
    FromBinary(NuisanceFits<F>),
}

impl<F: Scalar> ContinuousNuisance<F> {
    pub fn predict(&self, features: ArrayView2<'_, F>) -> Result<ContinuousPredictions<F>> {
        match self {
            ContinuousNuisance::Fitted { outcome, treatment, variance, covariance, floor } => {
                let mu = outcome.predict(features)?;
                let pi = treatment.predict(features)?;
                let mut var = variance.predict(features)?;
                for v in &mut var {
                    *v = v.max(*floor);
                }
                let cov = covariance.predict(features)?;
                let slope = cov.iter().zip(&var).map(|(&c, &v)| c / v).collect();
                Ok(ContinuousPredictions { mu, pi, variance: var, slope })
            }
            ContinuousNuisance::FromBinary(fits) => {
                let mu0 = fits.mu0.predict(features)?;
                let mu1 = fits.mu1.predict(features)?;
                let pi = fits.pi.predict(features)?;
                let n = pi.len();
                let mut mu = Vec::with_capacity(n);
                let mut variance = Vec::with_capacity(n);
                let mut slope = Vec::with_capacity(n);
                for i in 0..n {
                    let p = pi[i];
                    mu.push(p * mu1[i] + (F::one() - p) * mu0[i]);
                    variance.push(p * (F::one() - p));
                    slope.push(mu1[i] - mu0[i]);
                }
                Ok(ContinuousPredictions { mu, pi, variance, slope })
            }
        }
    }
}

/// Fits the four nuisance regressions on training data. The variance and
/// covariance targets are residual products computed from the in-sample
/// outcome and treatment predictions.
pub fn fit_continuous_nuisance<F: Scalar>(
    train: &Dataset<F>,
    specs: &ContinuousSpecs,
    variance_floor: f64,
    seed: u64,
) -> Result<ContinuousNuisance<F>> {
    if !(variance_floor > 0.0 && variance_floor.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "the treatment-variance floor must be positive and finite, got {variance_floor}"
        )));
    }
    let x = train.covariates();
    let outcome =
        learners::fit(&specs.outcome, x, train.outcome(), seed::derive(seed, &[stage::OUTCOME]))?;
    let treatment = learners::fit(
        &specs.treatment,
        x,
        train.treatment(),
        seed::derive(seed, &[stage::PROPENSITY]),
    )?;
    let mu_hat = outcome.predict(x)?;
    let pi_hat = treatment.predict(x)?;
    let n = train.n();
    let mut squared = Vec::with_capacity(n);
    let mut cross = Vec::with_capacity(n);
    for i in 0..n {
        let a_resid = train.treatment()[i] - pi_hat[i];
        let y_resid = train.outcome()[i] - mu_hat[i];
        squared.push(a_resid * a_resid);
        cross.push(a_resid * y_resid);
    }
    let variance =
        learners::fit(&specs.variance, x, &squared, seed::derive(seed, &[stage::VARIANCE]))?;
    let covariance =
        learners::fit(&specs.covariance, x, &cross, seed::derive(seed, &[stage::COVARIANCE]))?;
    Ok(ContinuousNuisance::Fitted {
        outcome,
        treatment,
        variance,
        covariance,
        floor: F::from_f64_lossy(variance_floor),
    })
}

/// Continuous-treatment pseudo-outcomes from aligned predictions.
pub fn pseudo_outcomes<F: Scalar>(
    outcome: &[F],
    treatment: &[F],
    predictions: &ContinuousPredictions<F>,
) -> Result<Vec<F>> {
    let n = outcome.len();
    if [treatment.len(), predictions.mu.len(), predictions.pi.len(),
        predictions.variance.len(), predictions.slope.len()]
    .iter()
    .any(|&len| len != n)
    {
        return Err(Error::InvalidData(
            "pseudo-outcome inputs have mismatched lengths".into(),
        ));
    }
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let a_resid = treatment[i] - predictions.pi[i];
        let v = predictions.variance[i];
        let lambda = predictions.slope[i];
        let value =
            (outcome[i] - predictions.mu[i] - lambda * a_resid) * a_resid / v + lambda;
        if !value.is_finite() {
            return Err(Error::Numeric(format!(
                "continuous pseudo-outcome is not finite at row {} \
                 (treatment variance {})",
                i + 1,
                v.to_f64_lossy()
            )));
        }
        values.push(value);
    }
    Ok(values)
}

struct ContinuousStage {
    specs: ContinuousSpecs,
    variance_floor: f64,
}

impl<F: Scalar> FoldStage<F> for ContinuousStage {
    fn run(&self, train: &Dataset<F>, eval: &Dataset<F>, seed: u64) -> Result<StageValues<F>> {
        let fits = fit_continuous_nuisance(train, &self.specs, self.variance_floor, seed)?;
        let train_preds = fits.predict(train.covariates())?;
        let eval_preds = fits.predict(eval.covariates())?;
        let phi_train = pseudo_outcomes(train.outcome(), train.treatment(), &train_preds)?;
        let phi_eval = pseudo_outcomes(eval.outcome(), eval.treatment(), &eval_preds)?;
        Ok(StageValues {
            phi_train,
            phi_eval,
            direct_train: train_preds.slope,
            direct_eval: eval_preds.slope,
        })
    }
}

/// The binary stage re-expressed through the continuous formulas; used to
/// verify the exact reduction. Nuisances are fit with the same seeds as the
/// binary pipeline, so with the outcome-difference variant the two paths see
/// identical models.
struct MomentMatchedStage<'a> {
    outcome_spec: &'a LearnerSpec,
    propensity_spec: &'a PropensitySpec,
    clip: f64,
}

impl<F: Scalar> FoldStage<F> for MomentMatchedStage<'_> {
    fn run(&self, train: &Dataset<F>, eval: &Dataset<F>, seed: u64) -> Result<StageValues<F>> {
        let fits = nuisance::fit_nuisances(
            train,
            self.outcome_spec,
            self.propensity_spec,
            F::from_f64_lossy(self.clip),
            seed,
        )?;
        let converted = ContinuousNuisance::FromBinary(fits);
        let train_preds = converted.predict(train.covariates())?;
        let eval_preds = converted.predict(eval.covariates())?;
        let phi_train = pseudo_outcomes(train.outcome(), train.treatment(), &train_preds)?;
        let phi_eval = pseudo_outcomes(eval.outcome(), eval.treatment(), &eval_preds)?;
        Ok(StageValues {
            phi_train,
            phi_eval,
            direct_train: train_preds.slope,
            direct_eval: eval_preds.slope,
        })
    }
}

/// Runs one estimation pass on continuous-treatment data.
pub fn run_continuous<F: Scalar>(
    data: &Dataset<F>,
    cfg: &AlgorithmConfig,
    variance_floor: f64,
) -> Result<PerObservationEstimates<F>> {
    if data.mode() != Mode::Continuous {
        return Err(Error::InvalidConfig(
            "run_continuous expects continuous-treatment data; use run_algorithm instead"
                .into(),
        ));
    }
    let stage_impl =
        ContinuousStage { specs: ContinuousSpecs::from_config(cfg)?, variance_floor };
    crossfit::run_stage(data, cfg, &stage_impl, None)
}

/// Runs the continuous pipeline on *binary* data via the exact moment
/// reduction of the binary nuisances. Apart from float rounding this must
/// reproduce [`crossfit::run_algorithm`].
pub fn run_moment_matched<F: Scalar>(
    data: &Dataset<F>,
    cfg: &AlgorithmConfig,
) -> Result<PerObservationEstimates<F>> {
    if data.mode() != Mode::Binary {
        return Err(Error::InvalidConfig(
            "the moment-matched reduction applies to binary-treatment data".into(),
        ));
    }
    let stage_impl = MomentMatchedStage {
        outcome_spec: &cfg.outcome_spec,
        propensity_spec: &cfg.propensity_spec,
        clip: cfg.clip,
    };
    crossfit::run_stage(data, cfg, &stage_impl, None)
}

/// Full continuous-treatment analysis: estimation pass plus the summary
/// report over the configured subsets.
pub fn continuous_tevim<F: Scalar>(
    data: &Dataset<F>,
    cfg: &AlgorithmConfig,
    variance_floor: f64,
    z: F,
) -> Result<AnalysisSummary<F>> {
    let estimates = run_continuous(data, cfg, variance_floor)?;
    estimands::summarize(&estimates, &cfg.subsets, z)
}
