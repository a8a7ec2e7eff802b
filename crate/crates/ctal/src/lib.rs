//! Pool-based active learning for classification, built around a
//! tree-guided labeling strategy.
//!
//! Starting from a small labeled seed, the central strategy fits a
//! classification tree to the labeled rows, treats its leaves as regions of
//! the feature space, and splits each labeling batch across those regions:
//! regions whose labeled rows still disagree get a larger share of the
//! budget, regions that look settled get a smaller one. Inside each region
//! the batch is filled either uniformly at random or by a search that
//! balances diversity against representativeness.
//!
//! The crate also ships the pieces needed to measure such a strategy
//! fairly: random, clustering-based, and committee-based baselines, a
//! random-forest evaluator scored by balanced accuracy, a rank-sum
//! significance test, and a benchmark harness that replays the whole
//! protocol over many repeats with paired splits and deterministic
//! seeding. The `ctal` binary exposes the harness on the command line.
//!
//! # Quick start
//!
//! ```
//! use ctal::data::PoolState;
//! use ctal::strategies::{ctal_select, InLeafSampling, StrategyConfig, StrategyKind};
//! use ndarray::Array2;
//!
//! // Two noisy blobs, one per class.
//! let n = 40;
//! let mut features = Array2::zeros((n, 2));
//! let mut labels = Vec::new();
//! for i in 0..n {
//!     let class = i % 2;
//!     let offset = if class == 0 { 0.0 } else { 4.0 };
//!     features[[i, 0]] = offset + (i as f64 * 0.37).sin();
//!     features[[i, 1]] = offset + (i as f64 * 0.53).cos();
//!     labels.push(class);
//! }
//!
//! // Label ten rows, then ask the tree-guided strategy for ten more.
//! let rows: Vec<usize> = (0..n).collect();
//! let mut pool = PoolState::new(&rows);
//! pool.label(&rows[..10]);
//! let labeled_labels: Vec<usize> =
//!     pool.labeled_vec().iter().map(|&i| labels[i]).collect();
//!
//! let config = StrategyConfig::new(StrategyKind::CtalRs);
//! let picked = ctal_select(
//!     features.view(),
//!     &pool,
//!     &labeled_labels,
//!     2,
//!     10,
//!     InLeafSampling::Random,
//!     &config,
//!     7,
//! )?;
//! assert_eq!(picked.len(), 10);
//! assert!(picked.iter().all(|&i| !pool.is_labeled(i)));
//! # Ok::<(), ctal::Error>(())
//! ```
//!
//! The guide under `book/` walks through each module in order; its code
//! blocks compile and run as doctests of this crate.

pub mod cli;
pub mod cluster;
pub mod data;
pub mod error;
pub mod forest;
pub mod harness;
pub mod metrics;
pub mod seeding;
pub mod strategies;
pub mod tree;

pub use data::{load_csv, CsvOptions, Dataset, LabelColumn, PoolState};
pub use error::{Error, Result};
pub use harness::{run_experiment, ExperimentConfig, ResultsTable};
pub use strategies::{StrategyConfig, StrategyKind};

/// Compiles every code block in the guide as a doctest so the book and the
/// library cannot drift apart.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    pub mod data {}
    #[doc = include_str!("../../../book/src/selection-tree.md")]
    pub mod selection_tree {}
    #[doc = include_str!("../../../book/src/budget-allocation.md")]
    pub mod budget_allocation {}
    #[doc = include_str!("../../../book/src/in-leaf-sampling.md")]
    pub mod in_leaf_sampling {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    pub mod baselines {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub mod evaluation {}
    #[doc = include_str!("../../../book/src/harness.md")]
    pub mod harness {}
}
