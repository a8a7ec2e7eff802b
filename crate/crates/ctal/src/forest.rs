//! Random-forest classifier.
//!
//! The forest is the evaluation model: after a strategy has spent its
//! labeling budget, a forest is fitted on the labeled set and scored on the
//! held-out test set. Each tree trains on a bootstrap resample of the
//! training rows and examines a fresh uniform feature subset at every
//! split. Tree seeds derive from the forest seed and the tree index, so
//! parallel and serial fits build identical forests.

use ndarray::{ArrayView1, ArrayView2};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seeding::{derive_seed, rng_from_seed};
use crate::tree::{fit_tree_with_sampling, ClassificationTree, TreeParams};

/// Number of feature candidates examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeaturesPerSplit {
    /// Every feature (no subsampling).
    All,
    /// A uniform random subset of ⌈√D⌉ features per split.
    #[default]
    Sqrt,
}

/// Forest fitting parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_samples_leaf: usize,
    /// Train each tree on a with-replacement resample of the training rows,
    /// the same size as the training set.
    pub bootstrap: bool,
    pub features_per_split: FeaturesPerSplit,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 50,
            min_samples_leaf: 3,
            bootstrap: true,
            features_per_split: FeaturesPerSplit::Sqrt,
        }
    }
}

/// A fitted forest of classification trees.
#[derive(Debug, Clone)]
pub struct Forest {
    trees: Vec<ClassificationTree>,
    n_classes: usize,
}

/// Fits `params.n_trees` trees on the rows selected by `indices`.
pub fn fit_forest(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    indices: &[usize],
    n_classes: usize,
    params: &ForestParams,
    rng_seed: u64,
) -> Result<Forest> {
    if params.n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
    }
    if indices.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let tree_params = TreeParams {
        min_samples_leaf: params.min_samples_leaf,
        max_depth: None,
    };
    let features_per_split = match params.features_per_split {
        FeaturesPerSplit::All => None,
        FeaturesPerSplit::Sqrt => {
            let d = features.ncols() as f64;
            Some((d.sqrt().ceil() as usize).max(1))
        }
    };
    let trees: Result<Vec<ClassificationTree>> = (0..params.n_trees)
        .into_par_iter()
        .map(|tree_index| {
            let tree_seed = derive_seed(rng_seed, &[tree_index as u64]);
            let sample: Vec<usize> = if params.bootstrap {
                let mut rng = rng_from_seed(tree_seed);
                (0..indices.len())
                    .map(|_| indices[rng.random_range(0..indices.len())])
                    .collect()
            } else {
                indices.to_vec()
            };
            fit_tree_with_sampling(
                features,
                labels,
                &sample,
                n_classes,
                &tree_params,
                features_per_split,
                derive_seed(tree_seed, &[1]),
            )
        })
        .collect();
    Ok(Forest {
        trees: trees?,
        n_classes,
    })
}

/// Majority vote over tree predictions; ties break to the smallest class id.
pub fn predict_forest(forest: &Forest, x: ArrayView1<'_, f64>) -> Result<usize> {
    forest.predict(x)
}

impl Forest {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[ClassificationTree] {
        &self.trees
    }

    /// Per-class vote counts over all trees; the counts sum to `n_trees`.
    pub fn votes(&self, x: ArrayView1<'_, f64>) -> Result<Vec<usize>> {
        let mut votes = vec![0usize; self.n_classes];
        for tree in &self.trees {
            votes[tree.predict(x)?] += 1;
        }
        Ok(votes)
    }

    /// Majority vote; ties break to the smallest class id.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        let votes = self.votes(x)?;
        let mut best = 0;
        for (class, &count) in votes.iter().enumerate() {
            if count > votes[best] {
                best = class;
            }
        }
        Ok(best)
    }

    /// Predicts each of the given rows.
    pub fn predict_rows(
        &self,
        features: ArrayView2<'_, f64>,
        indices: &[usize],
    ) -> Result<Vec<usize>> {
        indices
            .iter()
            .map(|&i| self.predict(features.row(i)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    use crate::seeding::rng_from_seed;
    use crate::tree::fit_tree;

    fn random_data(seed: u64, n: usize, d: usize, n_classes: usize) -> (Array2<f64>, Vec<usize>) {
        let mut rng = rng_from_seed(seed);
        let features = Array2::from_shape_fn((n, d), |_| rng.random::<f64>());
        let labels = (0..n).map(|_| rng.random_range(0..n_classes)).collect();
        (features, labels)
    }

    fn two_blobs(seed: u64, per_blob: usize) -> (Array2<f64>, Vec<usize>) {
        let mut rng = rng_from_seed(seed);
        let n = 2 * per_blob;
        let mut features = Array2::zeros((n, 2));
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let class = usize::from(i >= per_blob);
            let center = if class == 0 { -3.0 } else { 3.0 };
            features[[i, 0]] = center + rng.random::<f64>() - 0.5;
            features[[i, 1]] = center + rng.random::<f64>() - 0.5;
            labels.push(class);
        }
        (features, labels)
    }

    #[test]
    fn degenerate_forest_equals_single_tree() {
        for seed in 0..20u64 {
            let (features, labels) = random_data(seed, 40, 3, 3);
            let indices: Vec<usize> = (0..40).collect();
            let params = ForestParams {
                n_trees: 1,
                min_samples_leaf: 2,
                bootstrap: false,
                features_per_split: FeaturesPerSplit::All,
            };
            let forest =
                fit_forest(features.view(), &labels, &indices, 3, &params, seed).unwrap();
            let tree_params = TreeParams {
                min_samples_leaf: 2,
                max_depth: None,
            };
            let tree =
                fit_tree(features.view(), &labels, &indices, 3, &tree_params, seed).unwrap();
            let mut rng = rng_from_seed(seed + 1000);
            let probes = Array2::from_shape_fn((25, 3), |_| rng.random::<f64>() * 2.0 - 0.5);
            for i in 0..probes.nrows() {
                assert_eq!(
                    forest.predict(probes.row(i)).unwrap(),
                    tree.predict(probes.row(i)).unwrap(),
                    "seed {seed} probe {i}"
                );
            }
        }
    }

    #[test]
    fn forest_has_requested_tree_count_and_bootstrap_size() {
        let (features, labels) = random_data(5, 30, 2, 2);
        let indices: Vec<usize> = (0..30).collect();
        let forest = fit_forest(
            features.view(),
            &labels,
            &indices,
            2,
            &ForestParams::default(),
            7,
        )
        .unwrap();
        assert_eq!(forest.n_trees(), 50);
        for tree in forest.trees() {
            let total: usize = (0..tree.n_leaves())
                .map(|l| tree.leaf_class_counts(l).iter().sum::<usize>())
                .sum();
            assert_eq!(total, 30);
        }
    }

    #[test]
    fn same_seed_gives_identical_predictions() {
        let (features, labels) = random_data(11, 60, 4, 3);
        let indices: Vec<usize> = (0..60).collect();
        let a = fit_forest(features.view(), &labels, &indices, 3, &ForestParams::default(), 42)
            .unwrap();
        let b = fit_forest(features.view(), &labels, &indices, 3, &ForestParams::default(), 42)
            .unwrap();
        let mut rng = rng_from_seed(99);
        let probes = Array2::from_shape_fn((40, 4), |_| rng.random::<f64>());
        for i in 0..probes.nrows() {
            assert_eq!(
                a.predict(probes.row(i)).unwrap(),
                b.predict(probes.row(i)).unwrap()
            );
        }
    }

    #[test]
    fn parallel_and_serial_fits_agree() {
        let (features, labels) = random_data(13, 50, 3, 2);
        let indices: Vec<usize> = (0..50).collect();
        let parallel =
            fit_forest(features.view(), &labels, &indices, 2, &ForestParams::default(), 3)
                .unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let serial = pool.install(|| {
            fit_forest(features.view(), &labels, &indices, 2, &ForestParams::default(), 3)
                .unwrap()
        });
        for (a, b) in parallel.trees().iter().zip(serial.trees()) {
            assert_eq!(a.dump_text(), b.dump_text());
        }
    }

    #[test]
    fn majority_vote_and_tie_rule() {
        // Single-leaf trees with forced constant predictions.
        let constant_tree = |class: usize| {
            let features = Array2::from_elem((3, 1), 0.0);
            let labels = vec![class; 3];
            fit_tree(features.view(), &labels, &[0, 1, 2], 2, &TreeParams::default(), 0).unwrap()
        };
        let votes_one = Forest {
            trees: vec![constant_tree(1), constant_tree(1), constant_tree(0)],
            n_classes: 2,
        };
        let x = Array2::from_elem((1, 1), 0.0);
        assert_eq!(votes_one.votes(x.row(0)).unwrap(), vec![1, 2]);
        assert_eq!(votes_one.predict(x.row(0)).unwrap(), 1);

        let tied = Forest {
            trees: vec![constant_tree(0), constant_tree(1)],
            n_classes: 2,
        };
        assert_eq!(tied.predict(x.row(0)).unwrap(), 0);
    }

    #[test]
    fn vote_totals_sum_to_tree_count() {
        let (features, labels) = random_data(17, 45, 3, 3);
        let indices: Vec<usize> = (0..45).collect();
        let forest =
            fit_forest(features.view(), &labels, &indices, 3, &ForestParams::default(), 5)
                .unwrap();
        for i in 0..10 {
            let votes = forest.votes(features.row(i)).unwrap();
            assert_eq!(votes.iter().sum::<usize>(), 50);
        }
    }

    #[test]
    fn separable_blobs_are_classified_at_their_centers() {
        let (features, labels) = two_blobs(21, 25);
        let indices: Vec<usize> = (0..50).collect();
        let forest =
            fit_forest(features.view(), &labels, &indices, 2, &ForestParams::default(), 1)
                .unwrap();
        let tree_params = TreeParams::default();
        let tree = fit_tree(features.view(), &labels, &indices, 2, &tree_params, 1).unwrap();
        let centers = Array2::from_shape_vec((2, 2), vec![-3.0, -3.0, 3.0, 3.0]).unwrap();
        for (i, expected) in [(0usize, 0usize), (1, 1)] {
            assert_eq!(forest.predict(centers.row(i)).unwrap(), expected);
            assert_eq!(tree.predict(centers.row(i)).unwrap(), expected);
        }
    }

    #[test]
    fn unconstrained_forest_memorizes_distinct_data() {
        let (features, labels) = random_data(29, 80, 3, 3);
        let indices: Vec<usize> = (0..80).collect();
        let params = ForestParams {
            min_samples_leaf: 1,
            bootstrap: false,
            ..ForestParams::default()
        };
        let forest = fit_forest(features.view(), &labels, &indices, 3, &params, 0).unwrap();
        let predictions = forest.predict_rows(features.view(), &indices).unwrap();
        assert_eq!(predictions, labels);
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let (features, labels) = random_data(1, 10, 2, 2);
        let empty: Vec<usize> = Vec::new();
        let err = fit_forest(
            features.view(),
            &labels,
            &empty,
            2,
            &ForestParams::default(),
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyTrainingSet));
    }
}
