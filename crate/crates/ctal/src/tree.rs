//! Entropy-splitting classification tree.
//!
//! The tree serves two roles: it decomposes the feature space into leaf
//! regions that guide labeling-budget allocation, and it acts as the base
//! learner for the random forest and the query-by-committee strategy.
//!
//! Splitting is CART-style: greedy recursive partitioning maximizing
//! information gain, with candidate thresholds at midpoints between
//! consecutive distinct sorted feature values. A node stays a leaf when it
//! is pure, when no split leaves both children with at least
//! `min_samples_leaf` samples, or when `max_depth` is reached. Equal-gain
//! ties resolve to the lowest feature index, then the lowest threshold, so
//! fitting is fully deterministic.

use std::fmt::Write as _;

use ndarray::{ArrayView1, ArrayView2};
use rand_chacha::ChaCha8Rng;

use crate::data::PoolState;
use crate::error::{Error, Result};
use crate::metrics::entropy_from_counts;
use crate::seeding::rng_from_seed;

/// Gains at or below this threshold do not justify a split; it absorbs
/// floating-point noise from entropy sums that are analytically zero.
const MIN_GAIN: f64 = 1e-12;

/// Tree fitting parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeParams {
    /// Minimum training samples in every leaf, at least 1.
    pub min_samples_leaf: usize,
    /// Maximum tree depth (root at depth 0); unlimited when `None`.
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            min_samples_leaf: 1,
            max_depth: None,
        }
    }
}

impl TreeParams {
    /// Checks that the limits are usable: a positive leaf size and, when
    /// set, a positive depth cap.
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("min_samples_leaf must be at least 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::InvalidConfig("max_depth must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Node {
    Internal {
        feature: usize,
        threshold: f64,
        gain: f64,
        counts: Vec<usize>,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf_id: usize,
        counts: Vec<usize>,
        prediction: usize,
    },
}

/// A fitted classification tree. Immutable; leaves are numbered `0..K` in
/// left-to-right order and induce a partition of the feature space.
#[derive(Debug, Clone)]
pub struct ClassificationTree {
    nodes: Vec<Node>,
    /// Node index of each leaf, by leaf id.
    leaf_nodes: Vec<usize>,
    n_features: usize,
    n_classes: usize,
}

/// Majority class with ties broken by the smallest class id.
fn majority_class(counts: &[usize]) -> usize {
    let mut best = 0;
    for (class, &count) in counts.iter().enumerate() {
        if count > counts[best] {
            best = class;
        }
    }
    best
}

struct TreeBuilder<'a> {
    features: ArrayView2<'a, f64>,
    labels: &'a [usize],
    n_classes: usize,
    params: &'a TreeParams,
    /// Features examined per split; `None` scans all of them.
    features_per_split: Option<usize>,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    leaf_nodes: Vec<usize>,
}

impl TreeBuilder<'_> {
    fn class_counts(&self, indices: &[usize]) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &i in indices {
            counts[self.labels[i]] += 1;
        }
        counts
    }

    /// Highest-gain valid split of `indices`, as (feature, threshold, gain).
    fn best_split(&mut self, indices: &[usize], counts: &[usize]) -> Option<(usize, f64, f64)> {
        let n = indices.len();
        if n < 2 * self.params.min_samples_leaf {
            return None;
        }
        let parent_entropy = entropy_from_counts(counts);
        if parent_entropy == 0.0 {
            return None;
        }
        let d = self.features.ncols();
        let candidates: Vec<usize> = match self.features_per_split {
            None => (0..d).collect(),
            Some(k) => {
                let mut chosen =
                    rand::seq::index::sample(&mut self.rng, d, k.min(d)).into_vec();
                chosen.sort_unstable();
                chosen
            }
        };

        let mut best: Option<(usize, f64, f64)> = None;
        let mut best_gain = MIN_GAIN;
        let mut order = indices.to_vec();
        let mut left_counts = vec![0usize; self.n_classes];
        let mut right_counts = vec![0usize; self.n_classes];
        for &feature in &candidates {
            order.sort_by(|&a, &b| {
                self.features[[a, feature]]
                    .partial_cmp(&self.features[[b, feature]])
                    .expect("features are finite")
            });
            left_counts.iter_mut().for_each(|c| *c = 0);
            for split_at in 1..n {
                left_counts[self.labels[order[split_at - 1]]] += 1;
                let prev = self.features[[order[split_at - 1], feature]];
                let next = self.features[[order[split_at], feature]];
                if next <= prev {
                    continue;
                }
                if split_at < self.params.min_samples_leaf
                    || n - split_at < self.params.min_samples_leaf
                {
                    continue;
                }
                // Keep the threshold strictly below the right-hand value so
                // the `x <= t` rule reproduces this exact partition.
                let mut threshold = (prev + next) / 2.0;
                if threshold >= next {
                    threshold = prev;
                }
                for (r, (&total, &left)) in counts.iter().zip(&left_counts).enumerate() {
                    right_counts[r] = total - left;
                }
                let left_n = split_at as f64;
                let right_n = (n - split_at) as f64;
                let gain = parent_entropy
                    - left_n / n as f64 * entropy_from_counts(&left_counts)
                    - right_n / n as f64 * entropy_from_counts(&right_counts);
                if gain > best_gain {
                    best_gain = gain;
                    best = Some((feature, threshold, gain));
                }
            }
        }
        best
    }

    fn build(&mut self, indices: Vec<usize>, depth: usize) -> usize {
        let counts = self.class_counts(&indices);
        let depth_allows_split = self.params.max_depth.is_none_or(|limit| depth < limit);
        let split = if depth_allows_split {
            self.best_split(&indices, &counts)
        } else {
            None
        };
        match split {
            None => {
                let leaf_id = self.leaf_nodes.len();
                let node_index = self.nodes.len();
                let prediction = majority_class(&counts);
                self.nodes.push(Node::Leaf {
                    leaf_id,
                    counts,
                    prediction,
                });
                self.leaf_nodes.push(node_index);
                node_index
            }
            Some((feature, threshold, gain)) => {
                let (left_indices, right_indices): (Vec<usize>, Vec<usize>) = indices
                    .iter()
                    .partition(|&&i| self.features[[i, feature]] <= threshold);
                let node_index = self.nodes.len();
                self.nodes.push(Node::Leaf {
                    leaf_id: usize::MAX,
                    counts: Vec::new(),
                    prediction: 0,
                });
                let left = self.build(left_indices, depth + 1);
                let right = self.build(right_indices, depth + 1);
                self.nodes[node_index] = Node::Internal {
                    feature,
                    threshold,
                    gain,
                    counts,
                    left,
                    right,
                };
                node_index
            }
        }
    }
}

/// Fits a classification tree on the rows selected by `indices`.
///
/// `labels` covers every row of `features`; `n_classes` fixes the length of
/// count and probability vectors even when some class is absent from the
/// training rows. Fitting is deterministic; `rng_seed` only matters for the
/// feature-subsampled variant used inside forests.
pub fn fit_tree(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    indices: &[usize],
    n_classes: usize,
    params: &TreeParams,
    rng_seed: u64,
) -> Result<ClassificationTree> {
    fit_tree_with_sampling(features, labels, indices, n_classes, params, None, rng_seed)
}

/// As [`fit_tree`], but each split examines only `features_per_split`
/// uniformly drawn feature candidates when one is given.
pub(crate) fn fit_tree_with_sampling(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    indices: &[usize],
    n_classes: usize,
    params: &TreeParams,
    features_per_split: Option<usize>,
    rng_seed: u64,
) -> Result<ClassificationTree> {
    params.validate()?;
    if indices.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if indices.len() < params.min_samples_leaf {
        return Err(Error::UnfittableTree {
            labeled: indices.len(),
            min_samples_leaf: params.min_samples_leaf,
        });
    }
    if labels.len() != features.nrows() {
        return Err(Error::DimensionMismatch {
            expected: features.nrows(),
            found: labels.len(),
        });
    }
    if n_classes == 0 {
        return Err(Error::InvalidConfig("n_classes must be at least 1".into()));
    }
    for &i in indices {
        if labels[i] >= n_classes {
            return Err(Error::ClassOutOfRange {
                id: labels[i],
                n_classes,
            });
        }
    }
    let mut builder = TreeBuilder {
        features,
        labels,
        n_classes,
        params,
        features_per_split,
        rng: rng_from_seed(rng_seed),
        nodes: Vec::new(),
        leaf_nodes: Vec::new(),
    };
    builder.build(indices.to_vec(), 0);
    Ok(ClassificationTree {
        nodes: builder.nodes,
        leaf_nodes: builder.leaf_nodes,
        n_features: features.ncols(),
        n_classes,
    })
}

impl ClassificationTree {
    /// Number of leaves K.
    pub fn n_leaves(&self) -> usize {
        self.leaf_nodes.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Leaf reached by `x`: deterministic descent where ties at a threshold
    /// go left (`x[feature] <= threshold`).
    pub fn assign_leaf(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { leaf_id, .. } => return Ok(*leaf_id),
            }
        }
    }

    /// Majority class of the leaf reached by `x`; ties break to the
    /// smallest class id.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        let leaf = self.assign_leaf(x)?;
        Ok(self.leaf_prediction(leaf))
    }

    /// Leaf training-class counts normalized to probabilities.
    pub fn predict_proba(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        let leaf = self.assign_leaf(x)?;
        let counts = self.leaf_class_counts(leaf);
        let total: usize = counts.iter().sum();
        Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    /// Training-class counts of a leaf.
    pub fn leaf_class_counts(&self, leaf_id: usize) -> &[usize] {
        match &self.nodes[self.leaf_nodes[leaf_id]] {
            Node::Leaf { counts, .. } => counts,
            Node::Internal { .. } => unreachable!("leaf table points at a leaf"),
        }
    }

    /// Majority class of a leaf.
    pub fn leaf_prediction(&self, leaf_id: usize) -> usize {
        match &self.nodes[self.leaf_nodes[leaf_id]] {
            Node::Leaf { prediction, .. } => *prediction,
            Node::Internal { .. } => unreachable!("leaf table points at a leaf"),
        }
    }

    /// Human-readable indented dump of the tree structure, for debugging.
    /// The exact format is not a stability contract.
    pub fn dump_text(&self) -> String {
        let mut out = String::new();
        self.dump_node(0, 0, &mut out);
        out
    }

    fn dump_node(&self, node: usize, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        match &self.nodes[node] {
            Node::Internal {
                feature,
                threshold,
                gain,
                counts,
                left,
                right,
            } => {
                writeln!(out, "{pad}x{feature} <= {threshold} gain={gain:.6} counts={counts:?}")
                    .expect("writing to a string cannot fail");
                self.dump_node(*left, indent + 1, out);
                self.dump_node(*right, indent + 1, out);
            }
            Node::Leaf {
                leaf_id,
                counts,
                prediction,
            } => {
                writeln!(out, "{pad}leaf {leaf_id}: counts={counts:?} -> class {prediction}")
                    .expect("writing to a string cannot fail");
            }
        }
    }
}

/// Per-leaf statistics driving budget allocation.
#[derive(Debug, Clone)]
pub struct LeafStats {
    pub leaf_id: usize,
    /// Labeled pool rows falling in this leaf, ascending.
    pub labeled_indices: Vec<usize>,
    /// Unlabeled pool rows falling in this leaf, ascending.
    pub unlabeled_indices: Vec<usize>,
    /// Class distribution of the leaf's labeled samples.
    pub class_probs: Vec<f64>,
    /// Shannon entropy of `class_probs` in bits.
    pub entropy: f64,
    /// Fraction of the whole pool that is unlabeled and in this leaf.
    pub density: f64,
    /// Whether every labeled sample in the leaf shares one class.
    pub is_pure: bool,
    /// Allocation weight: 1 for pure leaves, the entropy otherwise.
    pub weight: f64,
    /// Labeling budget assigned to this leaf; 0 until allocation runs.
    pub allocation: usize,
}

/// Computes per-leaf statistics for a tree fitted on exactly
/// `pool`'s labeled set.
pub fn compute_leaf_stats(
    tree: &ClassificationTree,
    features: ArrayView2<'_, f64>,
    pool: &PoolState,
) -> Vec<LeafStats> {
    let k = tree.n_leaves();
    let mut labeled_by_leaf: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in pool.labeled() {
        let leaf = tree
            .assign_leaf(features.row(i))
            .expect("pool rows match the tree's dimensionality");
        labeled_by_leaf[leaf].push(i);
    }
    let mut unlabeled_by_leaf: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in pool.unlabeled() {
        let leaf = tree
            .assign_leaf(features.row(i))
            .expect("pool rows match the tree's dimensionality");
        unlabeled_by_leaf[leaf].push(i);
    }
    let pool_size = pool.len() as f64;
    labeled_by_leaf
        .into_iter()
        .zip(unlabeled_by_leaf)
        .enumerate()
        .map(|(leaf_id, (labeled_indices, unlabeled_indices))| {
            let counts = tree.leaf_class_counts(leaf_id);
            let total: usize = counts.iter().sum();
            assert_eq!(
                labeled_indices.len(),
                total,
                "leaf {leaf_id}: labeled pool rows disagree with the fitted tree"
            );
            let class_probs: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
            let entropy = entropy_from_counts(counts);
            let is_pure = counts.iter().filter(|&&c| c > 0).count() == 1;
            debug_assert_eq!(is_pure, entropy == 0.0);
            let weight = if is_pure { 1.0 } else { entropy };
            let density = unlabeled_indices.len() as f64 / pool_size;
            LeafStats {
                leaf_id,
                labeled_indices,
                unlabeled_indices,
                class_probs,
                entropy,
                density,
                is_pure,
                weight,
                allocation: 0,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{Array2, ArrayView2};
    use rand::Rng;

    use crate::seeding::rng_from_seed;

    fn column(values: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap()
    }

    fn all_indices(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    /// Independent exhaustive search over 1-D split candidates, used as an
    /// oracle for the fitted root split.
    fn brute_force_best_split(
        xs: &[f64],
        ys: &[usize],
        n_classes: usize,
        min_samples_leaf: usize,
    ) -> Option<(f64, f64)> {
        fn entropy(counts: &[usize]) -> f64 {
            let total: usize = counts.iter().sum();
            counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / total as f64;
                    -p * p.log2()
                })
                .sum()
        }
        let n = xs.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
        let mut parent = vec![0usize; n_classes];
        for &y in ys {
            parent[y] += 1;
        }
        let parent_entropy = entropy(&parent);
        let mut best: Option<(f64, f64)> = None;
        for i in 1..n {
            let (a, b) = (xs[order[i - 1]], xs[order[i]]);
            if b <= a || i < min_samples_leaf || n - i < min_samples_leaf {
                continue;
            }
            let mut threshold = (a + b) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            let mut left = vec![0usize; n_classes];
            for &j in &order[..i] {
                left[ys[j]] += 1;
            }
            let right: Vec<usize> = parent.iter().zip(&left).map(|(&p, &l)| p - l).collect();
            let gain = parent_entropy
                - (i as f64 / n as f64) * entropy(&left)
                - ((n - i) as f64 / n as f64) * entropy(&right);
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((threshold, gain));
            }
        }
        best
    }

    fn root_split(tree: &ClassificationTree) -> Option<(usize, f64, f64)> {
        match &tree.nodes[0] {
            Node::Internal {
                feature,
                threshold,
                gain,
                ..
            } => Some((*feature, *threshold, *gain)),
            Node::Leaf { .. } => None,
        }
    }

    #[test]
    fn separated_classes_split_at_the_gap_midpoint() {
        let xs: Vec<f64> = (0..10)
            .map(|i| -5.0 + 0.4 * i as f64)
            .chain((0..10).map(|i| 1.0 + 0.4 * i as f64))
            .collect();
        let ys: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let features = column(&xs);
        let params = TreeParams {
            min_samples_leaf: 10,
            ..TreeParams::default()
        };
        let tree = fit_tree(features.view(), &ys, &all_indices(20), 2, &params, 0).unwrap();
        let (feature, threshold, gain) = root_split(&tree).unwrap();
        let (oracle_threshold, oracle_gain) = brute_force_best_split(&xs, &ys, 2, 10).unwrap();
        assert_eq!(feature, 0);
        assert_eq!(threshold, oracle_threshold);
        assert_abs_diff_eq!(threshold, (-5.0 + 0.4 * 9.0 + 1.0) / 2.0);
        assert_abs_diff_eq!(gain, oracle_gain, epsilon = 1e-12);
        assert_abs_diff_eq!(gain, 1.0, epsilon = 1e-12);
        assert_eq!(tree.n_leaves(), 2);
        assert_eq!(tree.leaf_class_counts(0), &[10, 0]);
        assert_eq!(tree.leaf_class_counts(1), &[0, 10]);
    }

    #[test]
    fn fitted_root_matches_brute_force_on_random_one_dimensional_data() {
        for seed in 0..30u64 {
            let mut rng = rng_from_seed(seed);
            let n = rng.random_range(20..60);
            let n_classes = rng.random_range(2..4);
            // Values from a coarse grid so duplicate feature values occur.
            let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0..12) as f64 * 0.5).collect();
            let ys: Vec<usize> = (0..n).map(|_| rng.random_range(0..n_classes)).collect();
            let features = column(&xs);
            for msl in [1usize, 5] {
                let params = TreeParams {
                    min_samples_leaf: msl,
                    ..TreeParams::default()
                };
                let tree =
                    fit_tree(features.view(), &ys, &all_indices(n), n_classes, &params, 0)
                        .unwrap();
                let oracle = brute_force_best_split(&xs, &ys, n_classes, msl)
                    .filter(|&(_, gain)| gain > MIN_GAIN);
                match (root_split(&tree), oracle) {
                    (Some((_, threshold, gain)), Some((oracle_threshold, oracle_gain))) => {
                        assert_eq!(threshold, oracle_threshold, "seed {seed} msl {msl}");
                        assert_abs_diff_eq!(gain, oracle_gain, epsilon = 1e-12);
                    }
                    (None, None) => {}
                    (fitted, oracle) => {
                        panic!("seed {seed} msl {msl}: tree {fitted:?} vs oracle {oracle:?}")
                    }
                }
            }
        }
    }

    #[test]
    fn single_class_gives_single_leaf() {
        let features = column(&[1.0, 2.0, 3.0, 4.0]);
        let tree = fit_tree(
            features.view(),
            &[1, 1, 1, 1],
            &all_indices(4),
            2,
            &TreeParams::default(),
            0,
        )
        .unwrap();
        assert_eq!(tree.n_leaves(), 1);
        assert_eq!(tree.leaf_class_counts(0), &[0, 4]);
        assert_eq!(tree.predict(features.row(0)).unwrap(), 1);
    }

    #[test]
    fn twenty_samples_with_leaf_minimum_ten_yield_at_most_two_leaves() {
        for seed in 0..20u64 {
            let mut rng = rng_from_seed(seed);
            let features = Array2::from_shape_fn((20, 3), |_| rng.random::<f64>());
            let ys: Vec<usize> = (0..20).map(|_| rng.random_range(0..2)).collect();
            let params = TreeParams {
                min_samples_leaf: 10,
                ..TreeParams::default()
            };
            let tree = fit_tree(features.view(), &ys, &all_indices(20), 2, &params, 0).unwrap();
            assert!(tree.n_leaves() <= 2, "seed {seed}: {} leaves", tree.n_leaves());
        }
    }

    #[test]
    fn threshold_tie_goes_left() {
        let features = column(&[0.0, 1.0]);
        let tree = fit_tree(
            features.view(),
            &[0, 1],
            &[0, 1],
            2,
            &TreeParams::default(),
            0,
        )
        .unwrap();
        let (_, threshold, _) = root_split(&tree).unwrap();
        assert_eq!(threshold, 0.5);
        let at_threshold = column(&[0.5]);
        assert_eq!(
            tree.assign_leaf(at_threshold.row(0)).unwrap(),
            tree.assign_leaf(features.row(0)).unwrap()
        );
    }

    #[test]
    fn single_leaf_tree_assigns_everything_to_leaf_zero() {
        let features = column(&[1.0, 1.0, 1.0]);
        let tree = fit_tree(
            features.view(),
            &[0, 1, 0],
            &all_indices(3),
            2,
            &TreeParams::default(),
            0,
        )
        .unwrap();
        assert_eq!(tree.n_leaves(), 1);
        let probe = column(&[123.0]);
        assert_eq!(tree.assign_leaf(probe.row(0)).unwrap(), 0);
    }

    #[test]
    fn training_samples_land_in_leaves_counting_them() {
        let mut rng = rng_from_seed(7);
        let features = Array2::from_shape_fn((60, 2), |_| rng.random::<f64>());
        let ys: Vec<usize> = (0..60).map(|_| rng.random_range(0..3)).collect();
        let params = TreeParams {
            min_samples_leaf: 5,
            ..TreeParams::default()
        };
        let tree = fit_tree(features.view(), &ys, &all_indices(60), 3, &params, 0).unwrap();
        let mut routed: Vec<Vec<usize>> = vec![vec![0; 3]; tree.n_leaves()];
        for i in 0..60 {
            let leaf = tree.assign_leaf(features.row(i)).unwrap();
            routed[leaf][ys[i]] += 1;
        }
        for (leaf, counts) in routed.iter().enumerate() {
            assert_eq!(*counts, tree.leaf_class_counts(leaf));
        }
    }

    #[test]
    fn prediction_tie_breaks_to_smallest_class() {
        // Identical feature values admit no split, leaving one mixed leaf.
        let features = column(&[2.0; 10]);
        let mut ys = vec![0usize; 7];
        ys.extend([1, 1, 1]);
        let tree =
            fit_tree(features.view(), &ys, &all_indices(10), 2, &TreeParams::default(), 0)
                .unwrap();
        assert_eq!(tree.n_leaves(), 1);
        assert_eq!(tree.predict(features.row(0)).unwrap(), 0);
        assert_eq!(tree.predict_proba(features.row(0)).unwrap(), vec![0.7, 0.3]);

        let balanced = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let tied =
            fit_tree(features.view(), &balanced, &all_indices(10), 2, &TreeParams::default(), 0)
                .unwrap();
        assert_eq!(tied.predict(features.row(0)).unwrap(), 0);
    }

    #[test]
    fn pure_leaf_probability_is_exact() {
        let features = column(&[3.0; 12]);
        let ys = vec![1usize; 12];
        let tree =
            fit_tree(features.view(), &ys, &all_indices(12), 2, &TreeParams::default(), 0)
                .unwrap();
        assert_eq!(tree.predict(features.row(0)).unwrap(), 1);
        assert_eq!(tree.predict_proba(features.row(0)).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let features = column(&[0.0, 1.0]);
        let tree = fit_tree(
            features.view(),
            &[0, 1],
            &[0, 1],
            2,
            &TreeParams::default(),
            0,
        )
        .unwrap();
        let wide = Array2::from_shape_vec((1, 2), vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            tree.assign_leaf(wide.row(0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn too_few_samples_is_unfittable() {
        let features = column(&[1.0, 2.0, 3.0]);
        let params = TreeParams {
            min_samples_leaf: 10,
            ..TreeParams::default()
        };
        let err = fit_tree(features.view(), &[0, 1, 0], &all_indices(3), 2, &params, 0)
            .unwrap_err();
        assert!(matches!(
            err,
            Error::UnfittableTree {
                labeled: 3,
                min_samples_leaf: 10
            }
        ));
        let empty: Vec<usize> = Vec::new();
        let err = fit_tree(features.view(), &[0, 1, 0], &empty, 2, &params, 0).unwrap_err();
        assert!(matches!(err, Error::EmptyTrainingSet));
    }

    #[test]
    fn max_depth_caps_the_tree() {
        let mut rng = rng_from_seed(3);
        let features = Array2::from_shape_fn((80, 2), |_| rng.random::<f64>());
        let ys: Vec<usize> = (0..80).map(|_| rng.random_range(0..2)).collect();
        let unlimited = fit_tree(
            features.view(),
            &ys,
            &all_indices(80),
            2,
            &TreeParams::default(),
            0,
        )
        .unwrap();
        assert!(unlimited.n_leaves() > 2);
        let params = TreeParams {
            min_samples_leaf: 1,
            max_depth: Some(1),
        };
        let capped = fit_tree(features.view(), &ys, &all_indices(80), 2, &params, 0).unwrap();
        assert!(capped.n_leaves() <= 2);
    }

    fn walk_invariants(
        tree: &ClassificationTree,
        node: usize,
        min_samples_leaf: usize,
        n_classes: usize,
    ) {
        match &tree.nodes[node] {
            Node::Internal {
                gain, counts, left, right, ..
            } => {
                assert!(*gain > 0.0, "internal node with non-positive gain");
                assert!(entropy_from_counts(counts) <= (n_classes as f64).log2() + 1e-12);
                walk_invariants(tree, *left, min_samples_leaf, n_classes);
                walk_invariants(tree, *right, min_samples_leaf, n_classes);
            }
            Node::Leaf { counts, .. } => {
                let total: usize = counts.iter().sum();
                assert!(total >= min_samples_leaf);
                let distinct = counts.iter().filter(|&&c| c > 0).count();
                let entropy = entropy_from_counts(counts);
                assert_eq!(distinct == 1, entropy == 0.0);
                assert!(entropy <= (n_classes as f64).log2() + 1e-12);
            }
        }
    }

    #[test]
    fn fuzzed_trees_satisfy_structural_invariants() {
        for seed in 0..40u64 {
            let mut rng = rng_from_seed(seed);
            let n = rng.random_range(10..200);
            let d = rng.random_range(1..6);
            let n_classes = rng.random_range(2..5);
            let features =
                Array2::from_shape_fn((n, d), |_| rng.random_range(0..20) as f64 * 0.25);
            let ys: Vec<usize> = (0..n).map(|_| rng.random_range(0..n_classes)).collect();
            for msl in [1usize, 3, 10] {
                if n < msl {
                    continue;
                }
                let params = TreeParams {
                    min_samples_leaf: msl,
                    ..TreeParams::default()
                };
                let tree =
                    fit_tree(features.view(), &ys, &all_indices(n), n_classes, &params, 0)
                        .unwrap();
                walk_invariants(&tree, 0, msl, n_classes);
                let leaf_total: usize = (0..tree.n_leaves())
                    .map(|l| tree.leaf_class_counts(l).iter().sum::<usize>())
                    .sum();
                assert_eq!(leaf_total, n);
            }
        }
    }

    #[test]
    fn fitting_is_deterministic() {
        let mut rng = rng_from_seed(9);
        let features = Array2::from_shape_fn((120, 4), |_| rng.random::<f64>());
        let ys: Vec<usize> = (0..120).map(|_| rng.random_range(0..3)).collect();
        let params = TreeParams {
            min_samples_leaf: 4,
            ..TreeParams::default()
        };
        let a = fit_tree(features.view(), &ys, &all_indices(120), 3, &params, 1).unwrap();
        let b = fit_tree(features.view(), &ys, &all_indices(120), 3, &params, 2).unwrap();
        assert_eq!(a.dump_text(), b.dump_text());
    }

    fn stats_fixture(
        features: ArrayView2<'_, f64>,
        labels: &[usize],
        labeled: &[usize],
        params: &TreeParams,
        n_classes: usize,
    ) -> (ClassificationTree, Vec<LeafStats>, PoolState) {
        let mut pool = PoolState::new(&(0..features.nrows()).collect::<Vec<_>>());
        pool.label(labeled);
        let tree = fit_tree(features, labels, labeled, n_classes, params, 0).unwrap();
        let stats = compute_leaf_stats(&tree, features, &pool);
        (tree, stats, pool)
    }

    #[test]
    fn leaf_stats_on_a_mixed_single_leaf() {
        // Four identical labeled points, two per class: one impure leaf.
        let features = column(&[0.0; 10]);
        let labels = vec![0, 0, 1, 1, 0, 0, 0, 0, 0, 0];
        let (_, stats, _) = stats_fixture(
            features.view(),
            &labels,
            &[0, 1, 2, 3],
            &TreeParams::default(),
            2,
        );
        assert_eq!(stats.len(), 1);
        let leaf = &stats[0];
        assert_eq!(leaf.class_probs, vec![0.5, 0.5]);
        assert_eq!(leaf.entropy, 1.0);
        assert!(!leaf.is_pure);
        assert_eq!(leaf.weight, 1.0);
        assert_eq!(leaf.labeled_indices, vec![0, 1, 2, 3]);
        assert_eq!(leaf.unlabeled_indices.len(), 6);
        assert_abs_diff_eq!(leaf.density, 0.6);
    }

    #[test]
    fn leaf_stats_pure_leaf_weight_is_one() {
        let features = column(&[0.0; 8]);
        let labels = vec![1usize; 8];
        let mut pool = PoolState::new(&all_indices(8));
        pool.label(&[0, 1, 2]);
        let tree = fit_tree(features.view(), &labels, &[0, 1, 2], 2, &TreeParams::default(), 0)
            .unwrap();
        let stats = compute_leaf_stats(&tree, features.view(), &pool);
        assert_eq!(stats[0].entropy, 0.0);
        assert!(stats[0].is_pure);
        assert_eq!(stats[0].weight, 1.0);
        assert_eq!(stats[0].allocation, 0);
    }

    #[test]
    fn leaf_stats_density_fraction() {
        // Pool of 100; the left leaf holds 30 unlabeled points.
        let mut xs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let _ = i;
            xs.push(-1.0);
            labels.push(0);
        }
        for _ in 0..10 {
            xs.push(1.0);
            labels.push(1);
        }
        for _ in 0..30 {
            xs.push(-0.5);
            labels.push(0);
        }
        for _ in 0..50 {
            xs.push(0.5);
            labels.push(1);
        }
        let features = column(&xs);
        let labeled: Vec<usize> = (0..20).collect();
        let params = TreeParams {
            min_samples_leaf: 10,
            ..TreeParams::default()
        };
        let (tree, stats, pool) = stats_fixture(features.view(), &labels, &labeled, &params, 2);
        assert_eq!(tree.n_leaves(), 2);
        assert_abs_diff_eq!(stats[0].density, 0.30);
        assert_abs_diff_eq!(stats[1].density, 0.50);
        let labeled_total: usize = stats.iter().map(|s| s.labeled_indices.len()).sum();
        let unlabeled_total: usize = stats.iter().map(|s| s.unlabeled_indices.len()).sum();
        assert_eq!(labeled_total, pool.n_labeled());
        assert_eq!(unlabeled_total, pool.n_unlabeled());
        let density_sum: f64 = stats.iter().map(|s| s.density).sum();
        assert_abs_diff_eq!(density_sum, pool.n_unlabeled() as f64 / pool.len() as f64);
    }

    #[test]
    fn dump_text_shows_structure() {
        let features = column(&[0.0, 1.0]);
        let tree = fit_tree(
            features.view(),
            &[0, 1],
            &[0, 1],
            2,
            &TreeParams::default(),
            0,
        )
        .unwrap();
        let dump = tree.dump_text();
        assert!(dump.contains("x0 <= 0.5"), "{dump}");
        assert!(dump.contains("leaf 0"), "{dump}");
        assert!(dump.contains("leaf 1"), "{dump}");
    }
}
