//! Polynomial basis expansion and per-column standardization for the ridge
//! learners.

use ndarray::{Array2, ArrayView2};

use crate::scalar::Scalar;

/// Deterministic term layout: for each raw feature `j`, the powers
/// `x_j^1 .. x_j^degree`; then, if enabled, the pairwise products
/// `x_i * x_j` for `i < j`.
#[derive(Debug, Clone)]
pub(crate) struct PolynomialBasis {
    pub degree: usize,
    pub include_interactions: bool,
    pub raw_features: usize,
}

impl PolynomialBasis {
    pub fn term_count(&self) -> usize {
        let powers = self.raw_features * self.degree;
        let pairs = if self.include_interactions {
            self.raw_features * (self.raw_features.saturating_sub(1)) / 2
        } else {
            0
        };
        powers + pairs
    }

    pub fn expand<F: Scalar>(&self, x: ArrayView2<'_, F>) -> Array2<F> {
        debug_assert_eq!(x.ncols(), self.raw_features);
        let n = x.nrows();
        let m = self.term_count();
        let mut out = Array2::zeros((n, m));
        for i in 0..n {
            let mut col = 0;
            for j in 0..self.raw_features {
                let v = x[(i, j)];
                let mut pow = F::one();
                for _ in 0..self.degree {
                    pow *= v;
                    out[(i, col)] = pow;
                    col += 1;
                }
            }
            if self.include_interactions {
                for a in 0..self.raw_features {
                    for b in (a + 1)..self.raw_features {
                        out[(i, col)] = x[(i, a)] * x[(i, b)];
                        col += 1;
                    }
                }
            }
        }
        out
    }
}

/// Column-wise affine map `(x - mean) / scale` fit on the training fold.
/// Columns whose training standard deviation is (numerically) zero carry no
/// information and are dropped; `kept` records the surviving term indices.
#[derive(Debug, Clone)]
pub(crate) struct Standardizer<F: Scalar> {
    pub means: Vec<F>,
    pub scales: Vec<F>,
    pub kept: Vec<usize>,
}

impl<F: Scalar> Standardizer<F> {
    /// Fits means and scales accumulating rows in the given canonical order,
    /// so the result is invariant to the storage order of training rows.
    pub fn fit(basis: &Array2<F>, order: &[usize]) -> Self {
        let n = basis.nrows();
        let m = basis.ncols();
        let n_f = F::from_usize(n).unwrap();
        let mut means = vec![F::zero(); m];
        let mut scales = vec![F::zero(); m];
        let mut kept = Vec::with_capacity(m);
        for j in 0..m {
            let mut sum = F::zero();
            for &i in order {
                sum += basis[(i, j)];
            }
            let mean = sum / n_f;
            let mut ss = F::zero();
            for &i in order {
                let d = basis[(i, j)] - mean;
                ss += d * d;
            }
            let sd = (ss / n_f).sqrt();
            means[j] = mean;
            scales[j] = sd;
            let tiny = F::from_f64_lossy(1e-12) * (F::one() + mean.abs());
            if sd > tiny {
                kept.push(j);
            }
        }
        Standardizer { means, scales, kept }
    }

    /// Standardized design restricted to the kept columns.
    pub fn transform(&self, basis: &Array2<F>) -> Array2<F> {
        let n = basis.nrows();
        let mut out = Array2::zeros((n, self.kept.len()));
        for (dst, &src) in self.kept.iter().enumerate() {
            let mean = self.means[src];
            let scale = self.scales[src];
            for i in 0..n {
                out[(i, dst)] = (basis[(i, src)] - mean) / scale;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn term_layout_matches_the_documented_order() {
        let basis =
            PolynomialBasis { degree: 2, include_interactions: true, raw_features: 2 };
        assert_eq!(basis.term_count(), 5);
        let x = array![[2.0, 3.0]];
        let b = basis.expand(x.view());
        // x1, x1^2, x2, x2^2, x1*x2
        assert_eq!(b, array![[2.0, 4.0, 3.0, 9.0, 6.0]]);
    }

    #[test]
    fn no_interactions_for_single_feature() {
        let basis =
            PolynomialBasis { degree: 3, include_interactions: true, raw_features: 1 };
        assert_eq!(basis.term_count(), 3);
        let b = basis.expand(array![[2.0]].view());
        assert_eq!(b, array![[2.0, 4.0, 8.0]]);
    }

    #[test]
    fn constant_columns_are_dropped() {
        let b = array![[1.0, 5.0], [1.0, 7.0], [1.0, 9.0]];
        let order = vec![0, 1, 2];
        let s = Standardizer::fit(&b, &order);
        assert_eq!(s.kept, vec![1]);
        let t = s.transform(&b);
        assert_eq!(t.ncols(), 1);
        // Standardized column has mean ~0.
        let mean: f64 = t.column(0).iter().sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-14);
    }
}
