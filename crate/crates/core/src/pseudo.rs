//! The AIPW pseudo-outcome.
//!
//! For binary treatments the transformation
//!
//! ```text
//! phi_i = (y_i − mu(a_i, x_i)) · (a_i − pi(x_i)) / (pi(x_i)(1 − pi(x_i)))
//!         + mu(1, x_i) − mu(0, x_i)
//! ```
//!
//! has conditional mean equal to the CATE when either the outcome models or
//! the propensity model is correct. Everything downstream — the CATE
//! regression, the heterogeneity estimators and their confidence intervals —
//! consumes these values rather than raw outcomes.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nuisance::NuisanceFits;
use crate::scalar::Scalar;

/// Computes pseudo-outcomes from already-evaluated nuisance predictions, all
/// aligned with the same rows. The propensity values must lie strictly inside
/// (0, 1) — fitted models guarantee this via their clip.
pub fn from_predictions<F: Scalar>(
    outcome: &[F],
    treatment: &[F],
    mu0: &[F],
    mu1: &[F],
    pi: &[F],
) -> Result<Vec<F>> {
    let n = outcome.len();
    if [treatment.len(), mu0.len(), mu1.len(), pi.len()].iter().any(|&len| len != n) {
        return Err(Error::InvalidData(
            "pseudo-outcome inputs must all have the same length".into(),
        ));
    }
    let mut phi = Vec::with_capacity(n);
    for i in 0..n {
        let fitted = if treatment[i] == F::one() { mu1[i] } else { mu0[i] };
        let residual = outcome[i] - fitted;
        let p = pi[i];
        let weight = (treatment[i] - p) / (p * (F::one() - p));
        let value = residual * weight + mu1[i] - mu0[i];
        if !value.is_finite() {
            return Err(Error::Numeric(format!(
                "pseudo-outcome is not finite at row {} (propensity {p})",
                i + 1
            )));
        }
        phi.push(value);
    }
    Ok(phi)
}

/// Evaluates the fitted nuisances on every row of `data` and computes the
/// pseudo-outcomes.
pub fn compute<F: Scalar>(data: &Dataset<F>, fits: &NuisanceFits<F>) -> Result<Vec<F>> {
    let x = data.covariates();
    let mu0 = fits.mu0.predict(x)?;
    let mu1 = fits.mu1.predict(x)?;
    let pi = fits.pi.predict(x)?;
    from_predictions(data.outcome(), data.treatment(), &mu0, &mu1, &pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Mode;
    use crate::learners::LearnerSpec;
    use crate::nuisance::{fit_nuisances, PropensitySpec};
    use ndarray::array;

    #[test]
    fn treated_row_arithmetic() {
        // (3 − 2)·(1 − 0.5)/0.25 + 2 − 1 = 2 + 1 = 3.
        let phi = from_predictions(&[3.0], &[1.0], &[1.0], &[2.0], &[0.5]).unwrap();
        assert_eq!(phi, vec![3.0]);
    }

    #[test]
    fn control_row_arithmetic() {
        // (2 − 1)·(0 − 0.25)/(0.25·0.75) + 4 − 1 = −4/3 + 3 = 5/3.
        let phi: Vec<f64> =
            from_predictions(&[2.0], &[0.0], &[1.0], &[4.0], &[0.25]).unwrap();
        assert!((phi[0] - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_residuals_collapse_to_the_model_difference() {
        // When y equals the arm model exactly, phi is mu1 − mu0 regardless of
        // the propensity, so the mean of phi equals the mean difference too.
        let mu0 = vec![1.0, -0.5, 2.0, 0.0];
        let mu1 = vec![3.0, 0.5, 2.5, -1.0];
        let a = vec![1.0, 0.0, 1.0, 0.0];
        let y: Vec<f64> =
            a.iter().zip(mu0.iter().zip(&mu1)).map(|(&ai, (&m0, &m1))| if ai == 1.0 { m1 } else { m0 }).collect();
        let pi = vec![0.3, 0.5, 0.9, 0.2];
        let phi = from_predictions(&y, &a, &mu0, &mu1, &pi).unwrap();
        for i in 0..4 {
            assert_eq!(phi[i], mu1[i] - mu0[i]);
        }
        let mean: f64 = phi.iter().sum::<f64>() / 4.0;
        let diff_mean: f64 = mu0.iter().zip(&mu1).map(|(m0, m1)| m1 - m0).sum::<f64>() / 4.0;
        assert_eq!(mean, diff_mean);
    }

    #[test]
    fn degenerate_propensity_is_a_numeric_error() {
        let err = from_predictions(&[1.0, 1.0], &[1.0, 0.0], &[0.0, 0.0], &[1.0, 1.0], &[0.5, 0.0])
            .unwrap_err();
        match err {
            Error::Numeric(message) => assert!(message.contains("row 2"), "{message}"),
            other => panic!("expected numeric error, got {other}"),
        }
    }

    #[test]
    fn misaligned_inputs_are_rejected() {
        assert!(from_predictions(&[1.0, 2.0], &[1.0], &[0.0], &[1.0], &[0.5]).is_err());
    }

    #[test]
    fn compute_matches_manual_formula_on_a_fitted_bundle() {
        let x = array![[0.0], [0.0], [1.0], [1.0], [2.0], [2.0]];
        let y = vec![1.0, 0.0, 2.0, 1.0, 3.0, 0.5];
        let a = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let names = vec!["x1".to_string()];
        let data = Dataset::new(y.clone(), a.clone(), x, names, Mode::Binary).unwrap();
        let fits = fit_nuisances(
            &data,
            &LearnerSpec::Constant,
            &PropensitySpec::KnownConstant { value: 0.5 },
            0.01,
            0,
        )
        .unwrap();
        let phi: Vec<f64> = compute(&data, &fits).unwrap();

        // Constant models: mu1 = mean(1, 2, 3) = 2, mu0 = mean(0, 1, 0.5) = 0.5.
        let (mu1, mu0) = (2.0, 0.5);
        for i in 0..6 {
            let fitted = if a[i] == 1.0 { mu1 } else { mu0 };
            let expected = (y[i] - fitted) * (a[i] - 0.5) / 0.25 + mu1 - mu0;
            assert!((phi[i] - expected).abs() < 1e-12, "row {i}: {} vs {expected}", phi[i]);
        }
    }
}
