//! Built-in regression learners.
//!
//! Every nuisance function, CATE regression, and subset-CATE regression in
//! this crate is fit with one of these self-contained learners: k-nearest
//! neighbours, ridge regression on a polynomial basis (with a logistic link
//! for probabilities), least-squares gradient boosted trees, or a constant.
//!
//! Two properties are load-bearing and deliberately engineered:
//!
//! * **Determinism** — identical inputs and seed give bit-identical models.
//! * **Row-permutation invariance** — for knn and ridge (and boosting with
//!   `subsample_fraction = 1`), reordering training rows leaves predictions
//!   bit-identical. All reductions over training rows therefore run in a
//!   canonical sorted order rather than storage order.

mod basis;
mod boosted;
mod knn;
mod ridge;

use std::cmp::Ordering;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which learner to fit, with its hyperparameters. Serializes to/from the
/// tagged JSON used in run configs, e.g.
/// `{"type":"ridge_basis","degree":3,"include_interactions":true,"penalty":1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LearnerSpec {
    /// Mean of the `k` nearest training targets (Euclidean distance, ties
    /// shared fractionally so the fit is permutation invariant).
    Knn { k: usize },
    /// Ridge regression on a standardized polynomial basis: powers
    /// `x_j, x_j^2, ..., x_j^degree` of each feature plus, optionally, the
    /// pairwise products `x_i * x_j`. The intercept is unpenalized.
    RidgeBasis {
        degree: usize,
        include_interactions: bool,
        penalty: f64,
    },
    /// Least-squares gradient boosting with depth-limited exact-greedy trees.
    BoostedTrees {
        rounds: usize,
        max_depth: usize,
        learning_rate: f64,
        min_leaf: usize,
        subsample_fraction: f64,
    },
    /// The training-target mean, ignoring features.
    Constant,
}

impl LearnerSpec {
    /// The smooth, flexible default used where an automatic choice is needed:
    /// cubic polynomial basis with interactions under a light ridge penalty.
    pub fn flexible() -> Self {
        LearnerSpec::RidgeBasis { degree: 3, include_interactions: true, penalty: 1.0 }
    }

    /// Short label for metrics tables.
    pub fn label(&self) -> &'static str {
        match self {
            LearnerSpec::Knn { .. } => "knn",
            LearnerSpec::RidgeBasis { .. } => "ridge_basis",
            LearnerSpec::BoostedTrees { .. } => "boosted_trees",
            LearnerSpec::Constant => "constant",
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            LearnerSpec::Knn { k } => {
                if k == 0 {
                    return Err(Error::InvalidConfig("knn needs k >= 1".into()));
                }
            }
            LearnerSpec::RidgeBasis { degree, penalty, .. } => {
                if degree == 0 {
                    return Err(Error::InvalidConfig("ridge_basis needs degree >= 1".into()));
                }
                if !(penalty >= 0.0 && penalty.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "ridge_basis penalty must be finite and >= 0, got {penalty}"
                    )));
                }
            }
            LearnerSpec::BoostedTrees {
                max_depth,
                learning_rate,
                min_leaf,
                subsample_fraction,
                ..
            } => {
                if max_depth == 0 {
                    return Err(Error::InvalidConfig("boosted_trees needs max_depth >= 1".into()));
                }
                if !(learning_rate > 0.0 && learning_rate.is_finite()) {
                    return Err(Error::InvalidConfig(
                        "boosted_trees needs a positive finite learning_rate".into(),
                    ));
                }
                if min_leaf == 0 {
                    return Err(Error::InvalidConfig("boosted_trees needs min_leaf >= 1".into()));
                }
                if !(subsample_fraction > 0.0 && subsample_fraction <= 1.0) {
                    return Err(Error::InvalidConfig(
                        "boosted_trees needs subsample_fraction in (0, 1]".into(),
                    ));
                }
            }
            LearnerSpec::Constant => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum ModelKind<F: Scalar> {
    Constant { value: F },
    Knn(knn::KnnModel<F>),
    Ridge(ridge::RidgeModel<F>),
    Boosted(boosted::BoostedModel<F>),
}

/// An immutable fitted model. Probability models carry their clipping
/// threshold, applied at prediction time — the single clipping site in the
/// whole pipeline.
#[derive(Debug, Clone)]
pub struct FittedModel<F: Scalar> {
    kind: ModelKind<F>,
    feature_count: usize,
    clip: Option<F>,
}

impl<F: Scalar> FittedModel<F> {
    /// Width of feature matrix this model predicts from.
    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    /// True for models fit with [`fit_probability`]; their predictions lie in
    /// `[clip, 1 - clip]`.
    pub fn is_probability(&self) -> bool {
        self.clip.is_some()
    }

    /// A constant model that ignores features (any width accepted is `width`).
    pub(crate) fn constant(value: F, feature_count: usize, clip: Option<F>) -> Self {
        let value = match clip {
            Some(c) => value.max(c).min(F::one() - c),
            None => value,
        };
        FittedModel { kind: ModelKind::Constant { value }, feature_count, clip }
    }

    /// Predicts one value per row of `features`, whose width must match the
    /// training width exactly.
    pub fn predict(&self, features: ArrayView2<'_, F>) -> Result<Vec<F>> {
        if features.ncols() != self.feature_count {
            return Err(Error::InvalidConfig(format!(
                "model was fit on {} feature(s) but asked to predict from {}",
                self.feature_count,
                features.ncols()
            )));
        }
        let mut out = match &self.kind {
            ModelKind::Constant { value } => vec![*value; features.nrows()],
            ModelKind::Knn(m) => m.predict(features),
            ModelKind::Ridge(m) => m.predict(features)?,
            ModelKind::Boosted(m) => m.predict(features),
        };
        if let Some(c) = self.clip {
            let hi = F::one() - c;
            for v in &mut out {
                *v = (*v).max(c).min(hi);
            }
        }
        Ok(out)
    }
}

/// Fits a regression of `targets` on `features`.
///
/// A zero-width feature matrix means "regress on nothing": the fit is the
/// canonical training mean, whatever the spec. `seed` feeds only the learners
/// that randomize (boosted trees with subsampling).
pub fn fit<F: Scalar>(
    spec: &LearnerSpec,
    features: ArrayView2<'_, F>,
    targets: &[F],
    seed: u64,
) -> Result<FittedModel<F>> {
    fit_inner(spec, features, targets, seed, None)
}

/// Fits a probability model of binary `targets` (each exactly 0 or 1) on
/// `features`. Predictions are clipped into `[clip, 1 - clip]`. Ridge specs
/// use a logistic link; the other learners regress the indicators directly.
pub fn fit_probability<F: Scalar>(
    spec: &LearnerSpec,
    features: ArrayView2<'_, F>,
    targets: &[F],
    clip: F,
    seed: u64,
) -> Result<FittedModel<F>> {
    if !(clip > F::zero() && clip < F::from_f64_lossy(0.5)) {
        return Err(Error::InvalidConfig(format!(
            "probability clip must lie in (0, 0.5), got {clip}"
        )));
    }
    let mut any0 = false;
    let mut any1 = false;
    for &t in targets {
        if t == F::zero() {
            any0 = true;
        } else if t == F::one() {
            any1 = true;
        } else {
            return Err(Error::InvalidData(format!(
                "probability fit requires 0/1 targets, got {t}"
            )));
        }
    }
    let needs_both = !matches!(spec, LearnerSpec::Constant) && features.ncols() > 0;
    if needs_both && !(any0 && any1) {
        return Err(Error::Estimation(
            "probability fit saw a single class; the training split has no variation".into(),
        ));
    }
    fit_inner(spec, features, targets, seed, Some(clip))
}

fn fit_inner<F: Scalar>(
    spec: &LearnerSpec,
    features: ArrayView2<'_, F>,
    targets: &[F],
    seed: u64,
    clip: Option<F>,
) -> Result<FittedModel<F>> {
    spec.validate()?;
    let n = features.nrows();
    if n == 0 {
        return Err(Error::InvalidData("cannot fit on an empty training set".into()));
    }
    if targets.len() != n {
        return Err(Error::InvalidData(format!(
            "{} target(s) for {n} feature row(s)",
            targets.len()
        )));
    }
    let q = features.ncols();

    // Regression on no features is defined as the training mean; this makes
    // the full-subset CATE share the ordinary code path.
    if q == 0 || matches!(spec, LearnerSpec::Constant) {
        return Ok(FittedModel::constant(canonical_mean(targets), q, clip));
    }

    let kind = match spec {
        LearnerSpec::Knn { k } => {
            if *k > n {
                return Err(Error::InvalidConfig(format!(
                    "knn k={k} exceeds the {n} training rows"
                )));
            }
            ModelKind::Knn(knn::KnnModel::fit(*k, features, targets))
        }
        LearnerSpec::RidgeBasis { degree, include_interactions, penalty } => {
            let penalty = F::from_f64_lossy(*penalty);
            let model = match clip {
                None => ridge::RidgeModel::fit_linear(
                    *degree,
                    *include_interactions,
                    features,
                    targets,
                    penalty,
                )?,
                Some(_) => ridge::RidgeModel::fit_logistic(
                    *degree,
                    *include_interactions,
                    features,
                    targets,
                    penalty,
                )?,
            };
            ModelKind::Ridge(model)
        }
        LearnerSpec::BoostedTrees {
            rounds,
            max_depth,
            learning_rate,
            min_leaf,
            subsample_fraction,
        } => ModelKind::Boosted(boosted::BoostedModel::fit(
            boosted::BoostParams {
                rounds: *rounds,
                max_depth: *max_depth,
                learning_rate: F::from_f64_lossy(*learning_rate),
                min_leaf: *min_leaf,
                subsample_fraction: *subsample_fraction,
            },
            features,
            targets,
            seed,
        )),
        LearnerSpec::Constant => unreachable!("handled above"),
    };
    Ok(FittedModel { kind, feature_count: q, clip })
}

/// Total order on finite floats; panics on NaN, which dataset validation and
/// the non-finite checks upstream rule out.
pub(crate) fn cmp_finite<F: Scalar>(a: &F, b: &F) -> Ordering {
    a.partial_cmp(b).expect("non-finite value in ordered reduction")
}

/// Sum in ascending-value order: bit-identical under any permutation of the
/// inputs.
pub(crate) fn canonical_sum<F: Scalar>(values: &[F]) -> F {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(cmp_finite);
    sorted.into_iter().fold(F::zero(), |acc, v| acc + v)
}

/// Mean via [`canonical_sum`]; the canonical mean of an empty slice is 0.
pub(crate) fn canonical_mean<F: Scalar>(values: &[F]) -> F {
    if values.is_empty() {
        return F::zero();
    }
    canonical_sum(values) / F::from_usize(values.len()).unwrap()
}
