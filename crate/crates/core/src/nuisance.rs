//! Nuisance models for binary treatments: arm-specific outcome regressions
//! mu(a, x) = E(Y | A = a, X = x) and the propensity score
//! pi(x) = P(A = 1 | X = x).
//!
//! Outcome models are fit separately within each treatment arm rather than
//! jointly on (A, X); the treated-minus-control difference of the two fits is
//! then the CATE estimate directly, with no interaction basis to choose.

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::{self, FittedModel, LearnerSpec};
use crate::scalar::Scalar;
use crate::seed;

/// How the propensity score is obtained.
///
/// Serializes as either a plain [`LearnerSpec`] object or
/// `{"type": "known_constant", "value": 0.5}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PropensityRepr", into = "PropensityRepr")]
pub enum PropensitySpec {
    /// Fit a probability model for `A = 1 | X` with the given learner.
    Learner(LearnerSpec),
    /// Treatment probability fixed by design — the recommended setting for
    /// randomized-trial data, where it is known exactly.
    KnownConstant { value: f64 },
}

impl PropensitySpec {
    pub fn validate(&self) -> Result<()> {
        if let PropensitySpec::KnownConstant { value } = self {
            if !(*value > 0.0 && *value < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "known_constant propensity must lie strictly in (0, 1), got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Short label for reports.
    pub fn label(&self) -> &'static str {
        match self {
            PropensitySpec::Learner(spec) => spec.label(),
            PropensitySpec::KnownConstant { .. } => "known_constant",
        }
    }
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum PropensityRepr {
    Known(KnownRepr),
    Learner(LearnerSpec),
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum KnownRepr {
    KnownConstant { value: f64 },
}

impl From<PropensityRepr> for PropensitySpec {
    fn from(repr: PropensityRepr) -> Self {
        match repr {
            PropensityRepr::Known(KnownRepr::KnownConstant { value }) => {
                PropensitySpec::KnownConstant { value }
            }
            PropensityRepr::Learner(spec) => PropensitySpec::Learner(spec),
        }
    }
}

impl From<PropensitySpec> for PropensityRepr {
    fn from(spec: PropensitySpec) -> Self {
        match spec {
            PropensitySpec::KnownConstant { value } => {
                PropensityRepr::Known(KnownRepr::KnownConstant { value })
            }
            PropensitySpec::Learner(spec) => PropensityRepr::Learner(spec),
        }
    }
}

/// The fitted nuisance bundle for one training set. Immutable once built.
#[derive(Debug, Clone)]
pub struct NuisanceFits<F: Scalar> {
    /// Control-arm outcome regression mu(0, ·).
    pub mu0: FittedModel<F>,
    /// Treated-arm outcome regression mu(1, ·).
    pub mu1: FittedModel<F>,
    /// Propensity model; predictions lie in `[clip, 1 − clip]`.
    pub pi: FittedModel<F>,
    /// Clip applied inside `pi` (the single clipping site).
    pub clip: F,
}

/// Fits mu(0, ·) and mu(1, ·) by regressing the outcome on the covariates
/// within each arm. Both arms must be nonempty in `train`.
pub fn fit_outcome_models<F: Scalar>(
    train: &Dataset<F>,
    spec: &LearnerSpec,
    seed: u64,
) -> Result<(FittedModel<F>, FittedModel<F>)> {
    let treated = train.treated_mask();
    let mut arm_rows = [Vec::new(), Vec::new()];
    for (i, &t) in treated.iter().enumerate() {
        arm_rows[usize::from(t)].push(i);
    }
    if arm_rows[0].is_empty() || arm_rows[1].is_empty() {
        return Err(Error::Estimation(
            "a treatment arm is empty in the training set; outcome models are fit per arm \
             — use arm-stratified folds (the default) or fewer folds"
                .into(),
        ));
    }

    let mut models = Vec::with_capacity(2);
    for (arm, rows) in arm_rows.iter().enumerate() {
        let features = train.covariates().select(Axis(0), rows);
        let targets: Vec<F> = rows.iter().map(|&i| train.outcome()[i]).collect();
        let model = learners::fit(spec, features.view(), &targets, seed::derive(seed, &[arm as u64]))?;
        models.push(model);
    }
    let mu1 = models.pop().expect("two arms fitted");
    let mu0 = models.pop().expect("two arms fitted");
    Ok((mu0, mu1))
}

/// Fits the propensity model. A `known_constant` spec yields a constant model
/// (clamped into the clip range, so downstream division is always safe); a
/// learner spec is fit as a probability model of the treatment indicator.
pub fn fit_propensity<F: Scalar>(
    train: &Dataset<F>,
    spec: &PropensitySpec,
    clip: F,
    seed: u64,
) -> Result<FittedModel<F>> {
    spec.validate()?;
    match spec {
        PropensitySpec::KnownConstant { value } => Ok(FittedModel::constant(
            F::from_f64_lossy(*value),
            train.p(),
            Some(clip),
        )),
        PropensitySpec::Learner(learner) => learners::fit_probability(
            learner,
            train.covariates(),
            train.treatment(),
            clip,
            seed,
        ),
    }
}

/// Fits the full bundle: both outcome arms plus the propensity model, with
/// per-model seeds derived from `seed`.
pub fn fit_nuisances<F: Scalar>(
    train: &Dataset<F>,
    outcome_spec: &LearnerSpec,
    propensity_spec: &PropensitySpec,
    clip: F,
    seed: u64,
) -> Result<NuisanceFits<F>> {
    if !(clip > F::zero() && clip < F::from_f64_lossy(0.5)) {
        return Err(Error::InvalidConfig(format!(
            "propensity clip must lie in (0, 0.5), got {clip}"
        )));
    }
    let (mu0, mu1) = fit_outcome_models(
        train,
        outcome_spec,
        seed::derive(seed, &[seed::stage::OUTCOME]),
    )?;
    let pi = fit_propensity(
        train,
        propensity_spec,
        clip,
        seed::derive(seed, &[seed::stage::PROPENSITY]),
    )?;
    Ok(NuisanceFits { mu0, mu1, pi, clip })
}
