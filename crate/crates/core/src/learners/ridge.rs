//! Ridge regression on the polynomial basis, with identity or logistic link.
//!
//! Normal equations are accumulated in a canonical row order (lexicographic
//! over the basis row, then the target) so that fits are bit-identical under
//! any permutation of the training rows. The intercept is never penalized.

use ndarray::{Array2, ArrayView2};

use super::basis::{PolynomialBasis, Standardizer};
use super::cmp_finite;
use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::scalar::Scalar;
use crate::stats::expit;

const IRLS_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Link {
    Identity,
    Logistic,
}

#[derive(Debug, Clone)]
pub(crate) struct RidgeModel<F: Scalar> {
    basis: PolynomialBasis,
    standardizer: Standardizer<F>,
    intercept: F,
    coefficients: Vec<F>,
    link: Link,
}

impl<F: Scalar> RidgeModel<F> {
    pub fn fit_linear(
        degree: usize,
        include_interactions: bool,
        features: ArrayView2<'_, F>,
        targets: &[F],
        penalty: F,
    ) -> Result<Self> {
        let prep = Prepared::build(degree, include_interactions, features, targets);
        let dim = prep.design_dim();
        let mut gram = vec![F::zero(); dim * dim];
        let mut rhs = vec![F::zero(); dim];
        let mut row = vec![F::zero(); dim];
        for &i in &prep.order {
            prep.design_row(i, &mut row);
            accumulate(&mut gram, &mut rhs, &row, targets[i], F::one(), dim);
        }
        symmetrize(&mut gram, dim);
        for j in 1..dim {
            gram[j * dim + j] += penalty;
        }
        let solution = solve_spd(&gram, &rhs, dim)?;
        Ok(prep.into_model(solution, Link::Identity))
    }

    /// Penalized logistic regression via iteratively reweighted least
    /// squares; `targets` are exactly 0/1.
    pub fn fit_logistic(
        degree: usize,
        include_interactions: bool,
        features: ArrayView2<'_, F>,
        targets: &[F],
        penalty: F,
    ) -> Result<Self> {
        let prep = Prepared::build(degree, include_interactions, features, targets);
        let dim = prep.design_dim();
        let n = targets.len();
        let eta_cap = F::from_f64_lossy(30.0);
        let w_floor = F::from_f64_lossy(1e-10);
        let tol = F::from_f64_lossy(1e-10);

        let mut beta = vec![F::zero(); dim];
        let mut row = vec![F::zero(); dim];
        for _ in 0..IRLS_MAX_ITER {
            let mut gram = vec![F::zero(); dim * dim];
            let mut rhs = vec![F::zero(); dim];
            for &i in &prep.order {
                prep.design_row(i, &mut row);
                let mut eta = F::zero();
                for (b, d) in beta.iter().zip(row.iter()) {
                    eta += *b * *d;
                }
                eta = eta.max(-eta_cap).min(eta_cap);
                let p = expit(eta);
                let w = (p * (F::one() - p)).max(w_floor);
                let z = eta + (targets[i] - p) / w;
                accumulate(&mut gram, &mut rhs, &row, z, w, dim);
            }
            symmetrize(&mut gram, dim);
            for j in 1..dim {
                gram[j * dim + j] += penalty;
            }
            let next = solve_spd(&gram, &rhs, dim)?;
            let mut delta = F::zero();
            for (a, b) in beta.iter().zip(next.iter()) {
                delta = delta.max((*a - *b).abs());
            }
            beta = next;
            if delta < tol {
                break;
            }
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numeric(format!(
                "logistic ridge diverged on {n} rows; consider a larger penalty"
            )));
        }
        Ok(prep.into_model(beta, Link::Logistic))
    }

    pub fn predict(&self, features: ArrayView2<'_, F>) -> Result<Vec<F>> {
        let raw = self.basis.expand(features);
        let b = self.standardizer.transform(&raw);
        let mut out = Vec::with_capacity(features.nrows());
        for i in 0..b.nrows() {
            let mut eta = self.intercept;
            for (j, c) in self.coefficients.iter().enumerate() {
                eta += *c * b[(i, j)];
            }
            if !eta.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite ridge prediction at evaluation row {}",
                    i + 1
                )));
            }
            out.push(match self.link {
                Link::Identity => eta,
                Link::Logistic => expit(eta),
            });
        }
        Ok(out)
    }
}

/// Expanded basis, canonical row order, and standardizer for one fit.
struct Prepared<F: Scalar> {
    basis: PolynomialBasis,
    standardizer: Standardizer<F>,
    standardized: Array2<F>,
    order: Vec<usize>,
}

impl<F: Scalar> Prepared<F> {
    fn build(
        degree: usize,
        include_interactions: bool,
        features: ArrayView2<'_, F>,
        targets: &[F],
    ) -> Self {
        let basis =
            PolynomialBasis { degree, include_interactions, raw_features: features.ncols() };
        let raw = basis.expand(features);
        let order = canonical_order(&raw, targets);
        let standardizer = Standardizer::fit(&raw, &order);
        let standardized = standardizer.transform(&raw);
        Prepared { basis, standardizer, standardized, order }
    }

    fn design_dim(&self) -> usize {
        self.standardizer.kept.len() + 1
    }

    /// Writes `[1, b_i1, ..., b_im]` into `row`.
    fn design_row(&self, i: usize, row: &mut [F]) {
        row[0] = F::one();
        for j in 0..self.standardized.ncols() {
            row[j + 1] = self.standardized[(i, j)];
        }
    }

    fn into_model(self, solution: Vec<F>, link: Link) -> RidgeModel<F> {
        RidgeModel {
            basis: self.basis,
            standardizer: self.standardizer,
            intercept: solution[0],
            coefficients: solution[1..].to_vec(),
            link,
        }
    }
}

/// Adds one weighted observation to the upper triangle of the normal
/// equations; call [`symmetrize`] once after the last row.
fn accumulate<F: Scalar>(gram: &mut [F], rhs: &mut [F], row: &[F], target: F, weight: F, dim: usize) {
    for j in 0..dim {
        let wj = weight * row[j];
        rhs[j] += wj * target;
        for k in j..dim {
            gram[j * dim + k] += wj * row[k];
        }
    }
}

fn symmetrize<F: Scalar>(gram: &mut [F], dim: usize) {
    for j in 0..dim {
        for k in 0..j {
            gram[j * dim + k] = gram[k * dim + j];
        }
    }
}

/// Lexicographic order over (basis row, target): a total order on rows that
/// any permutation of the same multiset of rows maps to itself.
fn canonical_order<F: Scalar>(basis: &Array2<F>, targets: &[F]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..basis.nrows()).collect();
    idx.sort_unstable_by(|&a, &b| {
        for j in 0..basis.ncols() {
            match cmp_finite(&basis[(a, j)], &basis[(b, j)]) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        cmp_finite(&targets[a], &targets[b])
    });
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn quadratic_is_fit_exactly_without_penalty() {
        // y = 1 + 2x - x^2 on five points; degree-2 basis spans it.
        let x = array![[-2.0], [-1.0], [0.0], [1.0], [2.0]];
        let y: Vec<f64> = x.column(0).iter().map(|&v| 1.0 + 2.0 * v - v * v).collect();
        let model = RidgeModel::fit_linear(2, false, x.view(), &y, 0.0).unwrap();
        let grid = array![[-1.5], [0.5], [3.0]];
        let pred = model.predict(grid.view()).unwrap();
        for (i, &g) in [-1.5, 0.5, 3.0].iter().enumerate() {
            let truth: f64 = 1.0 + 2.0 * g - g * g;
            assert!((pred[i] - truth).abs() < 1e-9, "at {g}: {} vs {truth}", pred[i]);
        }
    }

    #[test]
    fn accumulate_then_symmetrize_builds_the_gram() {
        let mut gram = vec![0.0; 4];
        let mut rhs = vec![0.0; 2];
        accumulate(&mut gram, &mut rhs, &[1.0, 2.0], 3.0, 1.0, 2);
        symmetrize(&mut gram, 2);
        assert_eq!(gram, vec![1.0, 2.0, 2.0, 4.0]);
        assert_eq!(rhs, vec![3.0, 6.0]);
    }

    #[test]
    fn canonical_order_ignores_storage_order() {
        let b1 = array![[1.0], [0.0], [2.0]];
        let t1 = vec![10.0, 20.0, 30.0];
        let b2 = array![[2.0], [1.0], [0.0]];
        let t2 = vec![30.0, 10.0, 20.0];
        let o1 = canonical_order(&b1, &t1);
        let o2 = canonical_order(&b2, &t2);
        let sorted1: Vec<f64> = o1.iter().map(|&i| t1[i]).collect();
        let sorted2: Vec<f64> = o2.iter().map(|&i| t2[i]).collect();
        assert_eq!(sorted1, sorted2);
    }
}
