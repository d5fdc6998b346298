//! Least-squares gradient boosting with exact-greedy regression trees.
//!
//! Split search sorts candidate rows by (feature value, residual) so gains
//! and leaf means are accumulated in a canonical order; with
//! `subsample_fraction = 1` the whole fit is then invariant to training-row
//! permutations. Subsampling draws rows from a ChaCha stream seeded per fit,
//! making randomized fits reproducible.

use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{canonical_mean, cmp_finite};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub(crate) struct BoostParams<F: Scalar> {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: F,
    pub min_leaf: usize,
    pub subsample_fraction: f64,
}

#[derive(Debug, Clone)]
enum TreeNode<F: Scalar> {
    Leaf { value: F },
    Split { feature: usize, threshold: F, left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct Tree<F: Scalar> {
    nodes: Vec<TreeNode<F>>,
}

impl<F: Scalar> Tree<F> {
    fn evaluate(&self, row: impl Fn(usize) -> F) -> F {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if row(*feature) <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BoostedModel<F: Scalar> {
    baseline: F,
    learning_rate: F,
    trees: Vec<Tree<F>>,
}

impl<F: Scalar> BoostedModel<F> {
    pub fn fit(
        params: BoostParams<F>,
        features: ArrayView2<'_, F>,
        targets: &[F],
        seed: u64,
    ) -> Self {
        let n = features.nrows();
        let baseline = canonical_mean(targets);
        let mut residuals: Vec<F> = targets.iter().map(|&t| t - baseline).collect();
        let mut trees = Vec::with_capacity(params.rounds);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        for _ in 0..params.rounds {
            let rows: Vec<usize> = if params.subsample_fraction < 1.0 {
                let amount =
                    ((params.subsample_fraction * n as f64).floor() as usize).clamp(1, n);
                let mut picked = rand::seq::index::sample(&mut rng, n, amount).into_vec();
                picked.sort_unstable();
                picked
            } else {
                (0..n).collect()
            };

            let mut builder = TreeBuilder {
                features,
                residuals: &residuals,
                max_depth: params.max_depth,
                min_leaf: params.min_leaf,
                nodes: Vec::new(),
            };
            builder.grow(rows, 0);
            let tree = Tree { nodes: builder.nodes };

            for (i, r) in residuals.iter_mut().enumerate() {
                let pred = tree.evaluate(|j| features[(i, j)]);
                *r -= params.learning_rate * pred;
            }
            trees.push(tree);
        }

        BoostedModel { baseline, learning_rate: params.learning_rate, trees }
    }

    pub fn predict(&self, queries: ArrayView2<'_, F>) -> Vec<F> {
        let mut out = Vec::with_capacity(queries.nrows());
        for i in 0..queries.nrows() {
            let mut value = self.baseline;
            for tree in &self.trees {
                value += self.learning_rate * tree.evaluate(|j| queries[(i, j)]);
            }
            out.push(value);
        }
        out
    }
}

struct TreeBuilder<'a, 'b, F: Scalar> {
    features: ArrayView2<'a, F>,
    residuals: &'b [F],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<TreeNode<F>>,
}

impl<F: Scalar> TreeBuilder<'_, '_, F> {
    /// Grows the subtree over `rows`, returning its node index.
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let leaf_value = || -> F {
            let values: Vec<F> = rows.iter().map(|&i| self.residuals[i]).collect();
            canonical_mean(&values)
        };
        if depth >= self.max_depth || rows.len() < 2 * self.min_leaf {
            let node = TreeNode::Leaf { value: leaf_value() };
            self.nodes.push(node);
            return self.nodes.len() - 1;
        }
        let Some((feature, threshold)) = self.best_split(&rows) else {
            let node = TreeNode::Leaf { value: leaf_value() };
            self.nodes.push(node);
            return self.nodes.len() - 1;
        };

        let mut left_rows = Vec::new();
        let mut right_rows = Vec::new();
        for &i in &rows {
            if self.features[(i, feature)] <= threshold {
                left_rows.push(i);
            } else {
                right_rows.push(i);
            }
        }
        // Midpoints can round onto a data value in pathological ulp cases;
        // fall back to a leaf rather than recurse on an empty side.
        if left_rows.is_empty() || right_rows.is_empty() {
            let node = TreeNode::Leaf { value: leaf_value() };
            self.nodes.push(node);
            return self.nodes.len() - 1;
        }

        let placeholder = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: F::zero() });
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[placeholder] = TreeNode::Split { feature, threshold, left, right };
        placeholder
    }

    /// Exact greedy SSE split search. Ties are broken toward the lower
    /// feature index and lower threshold by strict-improvement replacement.
    fn best_split(&self, rows: &[usize]) -> Option<(usize, F)> {
        let n = rows.len();
        let n_f = F::from_usize(n).unwrap();
        let mut best: Option<(F, usize, F)> = None;
        let mut pairs: Vec<(F, F)> = Vec::with_capacity(n);

        for feature in 0..self.features.ncols() {
            pairs.clear();
            for &i in rows {
                pairs.push((self.features[(i, feature)], self.residuals[i]));
            }
            pairs.sort_unstable_by(|a, b| {
                cmp_finite(&a.0, &b.0).then_with(|| cmp_finite(&a.1, &b.1))
            });

            let total: F = {
                let mut s = F::zero();
                for p in &pairs {
                    s += p.1;
                }
                s
            };
            let parent_score = total * total / n_f;

            let mut left_sum = F::zero();
            for split_at in 1..n {
                left_sum += pairs[split_at - 1].1;
                // Only boundaries between distinct feature values are valid.
                if pairs[split_at].0 == pairs[split_at - 1].0 {
                    continue;
                }
                if split_at < self.min_leaf || n - split_at < self.min_leaf {
                    continue;
                }
                let left_n = F::from_usize(split_at).unwrap();
                let right_n = F::from_usize(n - split_at).unwrap();
                let right_sum = total - left_sum;
                let gain =
                    left_sum * left_sum / left_n + right_sum * right_sum / right_n - parent_score;
                if gain > F::zero() && best.as_ref().is_none_or(|b| gain > b.0) {
                    let two = F::from_f64_lossy(2.0);
                    let threshold = (pairs[split_at - 1].0 + pairs[split_at].0) / two;
                    best = Some((gain, feature, threshold));
                }
            }
        }
        best.map(|(_, feature, threshold)| (feature, threshold))
    }
}
