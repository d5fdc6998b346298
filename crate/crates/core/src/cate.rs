//! CATE metalearners.
//!
//! Two strategies produce an initial estimate of the conditional average
//! treatment effect tau(x) = E(Y¹ − Y⁰ | X = x):
//!
//! * **Outcome difference** (T-learner): tau(x) = mu(1, x) − mu(0, x) from the
//!   two arm-specific outcome regressions.
//! * **Pseudo-outcome regression** (DR-learner): regress the AIPW
//!   pseudo-outcomes on the covariates directly.
//!
//! A third regression step projects tau(x) onto a covariate subset's
//! complement, giving the subset-CATE tau_s(x) = E(tau(X) | X_{−s}); with
//! every covariate marginalized out it degenerates to the training-mean
//! constant, which is how the average effect enters the estimators.

use ndarray::ArrayView2;

use crate::data::{drop_columns, CovariateSubset};
use crate::error::Result;
use crate::learners::{self, FittedModel, LearnerSpec};
use crate::nuisance::NuisanceFits;
use crate::scalar::Scalar;

/// A fitted CATE estimator, evaluable on full covariate rows.
#[derive(Debug, Clone)]
pub enum CateModel<F: Scalar> {
    /// Difference of the treated- and control-arm outcome models.
    OutcomeDifference { mu0: FittedModel<F>, mu1: FittedModel<F> },
    /// A single regression fit (of pseudo-outcomes, or of any direct
    /// effect-curve values) on the covariates.
    Regression(FittedModel<F>),
}

impl<F: Scalar> CateModel<F> {
    /// Evaluates tau(x) for every row of `covariates`.
    pub fn predict(&self, covariates: ArrayView2<'_, F>) -> Result<Vec<F>> {
        match self {
            CateModel::OutcomeDifference { mu0, mu1 } => {
                let p0 = mu0.predict(covariates)?;
                let p1 = mu1.predict(covariates)?;
                Ok(p1.into_iter().zip(p0).map(|(a, b)| a - b).collect())
            }
            CateModel::Regression(model) => model.predict(covariates),
        }
    }
}

/// The T-learner: tau(x) = mu(1, x) − mu(0, x).
pub fn t_learner<F: Scalar>(fits: &NuisanceFits<F>) -> CateModel<F> {
    CateModel::OutcomeDifference { mu0: fits.mu0.clone(), mu1: fits.mu1.clone() }
}

/// The DR-learner: regress pseudo-outcomes on all covariates. No internal
/// sample split — cross-fitting at the algorithm level is the only split.
pub fn dr_learner<F: Scalar>(
    pseudo: &[F],
    covariates: ArrayView2<'_, F>,
    spec: &LearnerSpec,
    seed: u64,
) -> Result<CateModel<F>> {
    Ok(CateModel::Regression(learners::fit(spec, covariates, pseudo, seed)?))
}

/// A regression of CATE values onto the complement of a covariate subset.
/// The kept columns are selected internally, so predictions can never depend
/// on the dropped covariates.
#[derive(Debug, Clone)]
pub struct SubsetCateModel<F: Scalar> {
    subset: CovariateSubset,
    model: FittedModel<F>,
}

impl<F: Scalar> SubsetCateModel<F> {
    pub fn subset(&self) -> &CovariateSubset {
        &self.subset
    }

    /// Evaluates tau_s for every row of the FULL covariate matrix; the
    /// subset's columns are dropped internally before prediction.
    pub fn predict(&self, covariates: ArrayView2<'_, F>) -> Result<Vec<F>> {
        let kept = drop_columns(covariates, &self.subset);
        self.model.predict(kept.view())
    }
}

/// Regresses CATE values on the covariates left after dropping `subset`.
/// With the full subset no columns remain and the fit is the training mean of
/// `tau_values` — the per-training-set average effect.
pub fn subset_cate<F: Scalar>(
    tau_values: &[F],
    covariates: ArrayView2<'_, F>,
    subset: &CovariateSubset,
    spec: &LearnerSpec,
    seed: u64,
) -> Result<SubsetCateModel<F>> {
    let kept = drop_columns(covariates, subset);
    let model = learners::fit(spec, kept.view(), tau_values, seed)?;
    Ok(SubsetCateModel { subset: subset.clone(), model })
}

/// The AIPW estimate of the average treatment effect: the mean pseudo-outcome.
pub fn ate_aipw<F: Scalar>(pseudo: &[F]) -> F {
    if pseudo.is_empty() {
        return F::zero();
    }
    pseudo.iter().copied().sum::<F>() / F::from_usize(pseudo.len()).unwrap()
}
