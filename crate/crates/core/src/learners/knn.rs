//! Brute-force k-nearest-neighbour regression.
//!
//! Prediction is the mean of the k nearest training targets under squared
//! Euclidean distance. When several training points tie at the k-th distance,
//! each tied point contributes a fractional share of the remaining weight, so
//! the prediction does not depend on the storage order of training rows.

use ndarray::{Array2, ArrayView2};

use super::cmp_finite;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub(crate) struct KnnModel<F: Scalar> {
    k: usize,
    features: Array2<F>,
    targets: Vec<F>,
}

impl<F: Scalar> KnnModel<F> {
    pub fn fit(k: usize, features: ArrayView2<'_, F>, targets: &[F]) -> Self {
        KnnModel { k, features: features.to_owned(), targets: targets.to_vec() }
    }

    pub fn predict(&self, queries: ArrayView2<'_, F>) -> Vec<F> {
        let n = self.features.nrows();
        let q = self.features.ncols();
        let k_f = F::from_usize(self.k).unwrap();
        let mut out = Vec::with_capacity(queries.nrows());
        let mut scored: Vec<(F, F)> = Vec::with_capacity(n);

        for qi in 0..queries.nrows() {
            scored.clear();
            for i in 0..n {
                let mut dist = F::zero();
                for j in 0..q {
                    let d = queries[(qi, j)] - self.features[(i, j)];
                    dist += d * d;
                }
                scored.push((dist, self.targets[i]));
            }
            // Sorting by (distance, target) makes the walk below canonical.
            scored.sort_unstable_by(|a, b| {
                cmp_finite(&a.0, &b.0).then_with(|| cmp_finite(&a.1, &b.1))
            });

            let mut taken = 0usize;
            let mut total = F::zero();
            let mut pos = 0usize;
            while taken < self.k && pos < n {
                // Group of equal distances starting at pos.
                let mut end = pos + 1;
                while end < n && scored[end].0 == scored[pos].0 {
                    end += 1;
                }
                let group = end - pos;
                let mut group_sum = F::zero();
                for item in &scored[pos..end] {
                    group_sum += item.1;
                }
                if taken + group <= self.k {
                    total += group_sum;
                    taken += group;
                } else {
                    let remaining = F::from_usize(self.k - taken).unwrap();
                    let share = remaining / F::from_usize(group).unwrap();
                    total += share * group_sum;
                    taken = self.k;
                }
                pos = end;
            }
            out.push(total / k_f);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn nearest_neighbour_interpolates() {
        let x = array![[0.0], [1.0], [2.0]];
        let y = vec![10.0, 20.0, 30.0];
        let m = KnnModel::fit(1, x.view(), &y);
        assert_eq!(m.predict(array![[0.1]].view()), vec![10.0]);
        assert_eq!(m.predict(array![[1.9]].view()), vec![30.0]);
    }

    #[test]
    fn two_nearest_average() {
        let x = array![[0.0], [1.0], [10.0]];
        let y = vec![1.0, 3.0, 100.0];
        let m = KnnModel::fit(2, x.view(), &y);
        assert_eq!(m.predict(array![[0.5]].view()), vec![2.0]);
    }

    #[test]
    fn distance_ties_share_weight_fractionally() {
        // Query at 0; neighbours at ±1 are tied. k=1 must average the tied
        // pair instead of picking whichever was stored first.
        let x = array![[-1.0], [1.0], [5.0]];
        let y = vec![0.0, 10.0, 99.0];
        let m = KnnModel::fit(1, x.view(), &y);
        assert_eq!(m.predict(array![[0.0]].view()), vec![5.0]);

        // Same data, reversed storage: bit-identical.
        let xr = array![[5.0], [1.0], [-1.0]];
        let yr = vec![99.0, 10.0, 0.0];
        let mr = KnnModel::fit(1, xr.view(), &yr);
        assert_eq!(mr.predict(array![[0.0]].view()), vec![5.0]);
    }

    #[test]
    fn duplicated_training_set_with_k1_matches_single_copy() {
        let x = array![[0.0], [2.0], [4.0]];
        let y = vec![5.0, -1.0, 2.5];
        let single = KnnModel::fit(1, x.view(), &y);

        let xd = array![[0.0], [2.0], [4.0], [0.0], [2.0], [4.0]];
        let yd = vec![5.0, -1.0, 2.5, 5.0, -1.0, 2.5];
        let duplicated = KnnModel::fit(1, xd.view(), &yd);

        let grid = array![[0.3], [1.7], [3.2], [9.0]];
        assert_eq!(single.predict(grid.view()), duplicated.predict(grid.view()));
    }
}
