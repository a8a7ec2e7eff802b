//! Query strategies.
//!
//! Every strategy answers the same question: given the current pool state
//! and a batch budget, which unlabeled samples should be labeled next?
//!
//! * `rs`: uniform random sampling.
//! * `ctal-rs`: fit a selection tree on the labeled set, allocate the
//!   budget across its leaves, draw uniformly inside each leaf.
//! * `ctal-divrep`: same allocation, but inside each leaf run k-means and
//!   pick one diverse-yet-representative sample per cluster.
//! * `irdm`: ignore the labeled set entirely, running k-means with k equal to the
//!   whole budget over the full pool, then the same per-cluster selection.
//! * `qbc`: a bootstrap committee of trees; query the samples whose
//!   committee votes have the highest entropy.
//!
//! Budget allocation splits the batch between pure and impure leaves
//! (impure leaves get a configurable multiple of the pure share, scaled by
//! the leaf-count ratio), then distributes each group's share across its
//! leaves proportionally to the square root of unlabeled density times the
//! leaf weight.

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::cluster::{
    divrep_optimize, kmeans, Cluster, DEFAULT_KMEANS_MAX_ITERS, DEFAULT_KMEANS_TOL,
};
use crate::data::PoolState;
use crate::error::{Error, Result};
use crate::metrics::entropy_from_counts;
use crate::seeding::{derive_seed, rng_from_seed};
use crate::tree::{compute_leaf_stats, fit_tree, ClassificationTree, LeafStats, TreeParams};

/// Strategy identifiers, stable across the CLI and results files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Rs,
    CtalRs,
    CtalDivrep,
    Irdm,
    Qbc,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Rs,
        StrategyKind::CtalRs,
        StrategyKind::CtalDivrep,
        StrategyKind::Irdm,
        StrategyKind::Qbc,
    ];

    pub fn id(self) -> &'static str {
        match self {
            StrategyKind::Rs => "rs",
            StrategyKind::CtalRs => "ctal-rs",
            StrategyKind::CtalDivrep => "ctal-divrep",
            StrategyKind::Irdm => "irdm",
            StrategyKind::Qbc => "qbc",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|kind| kind.id() == s)
            .ok_or_else(|| Error::UnknownStrategy {
                name: s.to_string(),
                valid: StrategyKind::ALL.map(StrategyKind::id).join(", "),
            })
    }
}

/// Whether per-leaf shares are computed within each purity group or in one
/// pass over all leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AllocationScope {
    /// Normalize weights within the pure group and within the impure
    /// group, each spending its own sub-budget.
    #[default]
    PerGroup,
    /// Normalize weights over all leaves at once, ignoring the group
    /// split. Kept for sensitivity analysis; the group fields of the
    /// resulting allocation are then informational only.
    Global,
}

/// Budget-allocation tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationParams {
    /// How many times more budget an impure leaf group receives relative
    /// to the pure group, before scaling by the leaf-count ratio.
    pub impure_bias: f64,
    pub scope: AllocationScope,
}

impl Default for AllocationParams {
    fn default() -> Self {
        Self {
            impure_bias: 3.0,
            scope: AllocationScope::PerGroup,
        }
    }
}

/// In-leaf sampling flavor for the tree-guided strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InLeafSampling {
    /// Uniform draws within each leaf.
    Random,
    /// Per-leaf k-means plus the diversity-versus-representativeness sweep.
    DivRep,
}

/// Full strategy configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Selection-tree parameters (also used by committee trees).
    pub tree_params: TreeParams,
    pub qbc_committee_size: usize,
    pub divrep_max_rounds: usize,
    pub allocation: AllocationParams,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            tree_params: TreeParams {
                min_samples_leaf: 10,
                max_depth: None,
            },
            qbc_committee_size: 10,
            divrep_max_rounds: 10,
            allocation: AllocationParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == StrategyKind::Qbc && self.qbc_committee_size < 2 {
            return Err(Error::InvalidConfig(
                "qbc committee size must be at least 2".into(),
            ));
        }
        let bias_is_positive = self
            .allocation
            .impure_bias
            .partial_cmp(&0.0)
            .is_some_and(|o| o == std::cmp::Ordering::Greater);
        if !bias_is_positive {
            return Err(Error::InvalidConfig("impure bias must be positive".into()));
        }
        if self.divrep_max_rounds == 0 {
            return Err(Error::InvalidConfig("divrep rounds must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-leaf labeling budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetAllocation {
    /// n_k* per leaf id; sums to `min(n_act, total unlabeled)`.
    pub per_leaf: Vec<usize>,
    /// Batch share assigned to pure leaves before clamping.
    pub n_pure_group: usize,
    /// Batch share assigned to impure leaves before clamping.
    pub n_impure_group: usize,
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Per-leaf allocation weight: sqrt of unlabeled density times leaf weight.
fn allocation_weight(stat: &LeafStats) -> f64 {
    (stat.density * stat.weight).sqrt()
}

/// Orders leaf ids by descending allocation weight, then ascending id.
fn weight_descending(stats: &[LeafStats], a: usize, b: usize) -> std::cmp::Ordering {
    allocation_weight(&stats[b])
        .partial_cmp(&allocation_weight(&stats[a]))
        .expect("weights are finite")
        .then(a.cmp(&b))
}

/// Shares `budget` across the given leaves proportionally to their
/// weights, rounding by largest remainder (ties: larger remainder first,
/// then lower leaf id). All-zero weights leave the budget unassigned.
fn proportional_share(
    stats: &[LeafStats],
    group: &[usize],
    budget: usize,
    per_leaf: &mut [usize],
) {
    let total_weight: f64 = group.iter().map(|&k| allocation_weight(&stats[k])).sum();
    if budget == 0 || group.is_empty() || total_weight <= 0.0 {
        return;
    }
    let mut assigned = 0usize;
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(group.len());
    for &k in group {
        let share = budget as f64 * allocation_weight(&stats[k]) / total_weight;
        let floor = share.floor() as usize;
        per_leaf[k] = floor;
        assigned += floor;
        remainders.push((share - floor as f64, k));
    }
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let leftover = budget.saturating_sub(assigned);
    for &(_, k) in remainders.iter().take(leftover) {
        per_leaf[k] += 1;
    }
}

/// Splits a batch of `n_act` across leaves.
///
/// The batch is first divided between the pure and impure leaf groups:
/// the pure share is `n_act / (1 + bias · max(1, impure leaves) / max(1,
/// pure leaves))`, rounded half-up, and the impure group takes the rest; a
/// missing group forfeits its share to the other. Each group's share is
/// then spread over its leaves proportionally to √(density · weight),
/// rounded by largest remainder. Finally every leaf is clamped to its
/// unlabeled count and any shortfall is refilled across leaves with spare
/// capacity, impure leaves first and each group in descending weight
/// order, so the total always equals `min(n_act, total unlabeled)`.
pub fn allocate_budget(
    stats: &[LeafStats],
    n_act: usize,
    params: &AllocationParams,
) -> BudgetAllocation {
    let pure: Vec<usize> = (0..stats.len()).filter(|&k| stats[k].is_pure).collect();
    let impure: Vec<usize> = (0..stats.len()).filter(|&k| !stats[k].is_pure).collect();

    let (n_pure_group, n_impure_group) = if impure.is_empty() {
        (n_act, 0)
    } else if pure.is_empty() {
        (0, n_act)
    } else {
        let ratio = params.impure_bias * impure.len().max(1) as f64 / pure.len().max(1) as f64;
        let pure_share = round_half_up(n_act as f64 / (1.0 + ratio)).min(n_act);
        (pure_share, n_act - pure_share)
    };

    let mut per_leaf = vec![0usize; stats.len()];
    match params.scope {
        AllocationScope::PerGroup => {
            proportional_share(stats, &pure, n_pure_group, &mut per_leaf);
            proportional_share(stats, &impure, n_impure_group, &mut per_leaf);
        }
        AllocationScope::Global => {
            let all: Vec<usize> = (0..stats.len()).collect();
            proportional_share(stats, &all, n_act, &mut per_leaf);
        }
    }

    // Clamp to capacity, then refill any shortfall by descending weight.
    let capacity: Vec<usize> = stats.iter().map(|s| s.unlabeled_indices.len()).collect();
    for (n_k, &cap) in per_leaf.iter_mut().zip(&capacity) {
        *n_k = (*n_k).min(cap);
    }
    let target = n_act.min(capacity.iter().sum());
    let mut deficit = target - per_leaf.iter().sum::<usize>();
    if deficit > 0 {
        // Refill impure leaves before pure ones; comparing weights across
        // the groups would be sensitive to the entropy scale, which must
        // not influence allocations.
        let mut order: Vec<usize> = impure.iter().chain(&pure).copied().collect();
        let group_len = impure.len();
        order[..group_len].sort_by(|&a, &b| weight_descending(stats, a, b));
        order[group_len..].sort_by(|&a, &b| weight_descending(stats, a, b));
        for k in order {
            if deficit == 0 {
                break;
            }
            let add = deficit.min(capacity[k] - per_leaf[k]);
            per_leaf[k] += add;
            deficit -= add;
        }
    }
    debug_assert_eq!(per_leaf.iter().sum::<usize>(), target);

    BudgetAllocation {
        per_leaf,
        n_pure_group,
        n_impure_group,
    }
}

/// Draws `min(k, unlabeled)` unlabeled indices uniformly without
/// replacement. Returned ascending.
pub fn random_select(pool: &PoolState, k: usize, rng_seed: u64) -> Vec<usize> {
    let unlabeled = pool.unlabeled_vec();
    let k = k.min(unlabeled.len());
    let mut rng = rng_from_seed(rng_seed);
    let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, unlabeled.len(), k)
        .into_iter()
        .map(|pos| unlabeled[pos])
        .collect();
    chosen.sort_unstable();
    chosen
}

/// Builds the dense label array the tree fitter expects from labels known
/// only for the labeled rows (in ascending labeled order). Entries of
/// unlabeled rows stay zero and are never read.
fn scatter_labels(n_rows: usize, labeled: &[usize], labeled_labels: &[usize]) -> Result<Vec<usize>> {
    if labeled.len() != labeled_labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labeled.len(),
            found: labeled_labels.len(),
        });
    }
    let mut full = vec![0usize; n_rows];
    for (&row, &label) in labeled.iter().zip(labeled_labels) {
        full[row] = label;
    }
    Ok(full)
}

/// A fitted selection tree together with its leaf statistics and budget.
#[derive(Debug)]
pub struct SelectionPlan {
    pub tree: ClassificationTree,
    /// Leaf statistics with `allocation` filled in.
    pub leaf_stats: Vec<LeafStats>,
    pub allocation: BudgetAllocation,
}

/// Fits the selection tree on the labeled set and allocates `n_act` across
/// its leaves. Fails with an unfittable-tree error when the labeled set is
/// smaller than `min_samples_leaf`; callers fall back to random sampling.
pub fn ctal_plan(
    features: ArrayView2<'_, f64>,
    pool: &PoolState,
    labeled_labels: &[usize],
    n_classes: usize,
    n_act: usize,
    config: &StrategyConfig,
    rng_seed: u64,
) -> Result<SelectionPlan> {
    config.validate()?;
    let labeled = pool.labeled_vec();
    let labels = scatter_labels(features.nrows(), &labeled, labeled_labels)?;
    let tree = fit_tree(
        features,
        &labels,
        &labeled,
        n_classes,
        &config.tree_params,
        rng_seed,
    )?;
    let mut leaf_stats = compute_leaf_stats(&tree, features, pool);
    let allocation = allocate_budget(&leaf_stats, n_act, &config.allocation);
    for (stat, &n_k) in leaf_stats.iter_mut().zip(&allocation.per_leaf) {
        stat.allocation = n_k;
    }
    Ok(SelectionPlan {
        tree,
        leaf_stats,
        allocation,
    })
}

/// Tree-guided selection: allocate the batch over the selection tree's
/// leaves, then sample inside each leaf per `mode`. Returns exactly
/// `min(n_act, unlabeled)` distinct unlabeled indices, ascending.
#[allow(clippy::too_many_arguments)]
pub fn ctal_select(
    features: ArrayView2<'_, f64>,
    pool: &PoolState,
    labeled_labels: &[usize],
    n_classes: usize,
    n_act: usize,
    mode: InLeafSampling,
    config: &StrategyConfig,
    rng_seed: u64,
) -> Result<Vec<usize>> {
    let plan = ctal_plan(
        features,
        pool,
        labeled_labels,
        n_classes,
        n_act,
        config,
        rng_seed,
    )?;
    let mut chosen = match mode {
        InLeafSampling::Random => {
            let mut rng = rng_from_seed(rng_seed);
            let mut chosen = Vec::with_capacity(n_act);
            for stat in &plan.leaf_stats {
                if stat.allocation == 0 {
                    continue;
                }
                chosen.extend(
                    rand::seq::index::sample(
                        &mut rng,
                        stat.unlabeled_indices.len(),
                        stat.allocation,
                    )
                    .into_iter()
                    .map(|pos| stat.unlabeled_indices[pos]),
                );
            }
            chosen
        }
        InLeafSampling::DivRep => {
            let mut clusters: Vec<Cluster> = Vec::new();
            for stat in &plan.leaf_stats {
                if stat.allocation == 0 {
                    continue;
                }
                let clustering = kmeans(
                    features,
                    &stat.unlabeled_indices,
                    stat.allocation,
                    derive_seed(rng_seed, &[stat.leaf_id as u64]),
                    DEFAULT_KMEANS_MAX_ITERS,
                    DEFAULT_KMEANS_TOL,
                )?;
                clusters.extend(clustering.clusters());
            }
            let labeled = pool.labeled_vec();
            divrep_optimize(
                features,
                &clusters,
                &labeled,
                rng_seed,
                config.divrep_max_rounds,
            )?
            .selected
        }
    };
    chosen.sort_unstable();
    Ok(chosen)
}

/// Budget-wide selection that ignores the labeled set: k-means with
/// `k = budget` over the entire pool, then one diverse-representative
/// sample per cluster. Stateless; each call recomputes from scratch.
pub fn irdm_select(
    features: ArrayView2<'_, f64>,
    pool: &PoolState,
    budget: usize,
    rng_seed: u64,
    max_rounds: usize,
) -> Result<Vec<usize>> {
    if budget == 0 {
        return Err(Error::ZeroBudget);
    }
    let candidates = pool.pool_indices();
    if budget > candidates.len() {
        return Err(Error::BudgetExceedsPool {
            budget,
            pool: candidates.len(),
        });
    }
    let clustering = kmeans(
        features,
        candidates,
        budget,
        rng_seed,
        DEFAULT_KMEANS_MAX_ITERS,
        DEFAULT_KMEANS_TOL,
    )?;
    let state = divrep_optimize(features, &clustering.clusters(), &[], rng_seed, max_rounds)?;
    let mut chosen = state.selected;
    chosen.sort_unstable();
    Ok(chosen)
}

/// Query-by-committee: bootstrap trees on the labeled set and query the
/// unlabeled samples with the highest vote entropy. Score ties are broken
/// uniformly at random under the seed. Returns ascending indices.
pub fn qbc_select(
    features: ArrayView2<'_, f64>,
    pool: &PoolState,
    labeled_labels: &[usize],
    n_classes: usize,
    batch: usize,
    config: &StrategyConfig,
    rng_seed: u64,
) -> Result<Vec<usize>> {
    if config.qbc_committee_size < 2 {
        return Err(Error::InvalidConfig(
            "qbc committee size must be at least 2".into(),
        ));
    }
    let labeled = pool.labeled_vec();
    if labeled.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let labels = scatter_labels(features.nrows(), &labeled, labeled_labels)?;

    let mut committee = Vec::with_capacity(config.qbc_committee_size);
    for member in 0..config.qbc_committee_size {
        let member_seed = derive_seed(rng_seed, &[member as u64]);
        let mut rng = rng_from_seed(member_seed);
        let resample: Vec<usize> = (0..labeled.len())
            .map(|_| labeled[rng.random_range(0..labeled.len())])
            .collect();
        committee.push(fit_tree(
            features,
            &labels,
            &resample,
            n_classes,
            &config.tree_params,
            derive_seed(member_seed, &[1]),
        )?);
    }

    let unlabeled = pool.unlabeled_vec();
    let scores: Vec<f64> = unlabeled
        .iter()
        .map(|&i| {
            let mut votes = vec![0usize; n_classes];
            for tree in &committee {
                votes[tree
                    .predict(features.row(i))
                    .expect("pool rows match the tree's dimensionality")] += 1;
            }
            entropy_from_counts(&votes)
        })
        .collect();

    let batch = batch.min(unlabeled.len());
    let mut order: Vec<usize> = (0..unlabeled.len()).collect();
    let mut tie_rng = rng_from_seed(derive_seed(
        rng_seed,
        &[config.qbc_committee_size as u64],
    ));
    order.shuffle(&mut tie_rng);
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut chosen: Vec<usize> = order[..batch].iter().map(|&pos| unlabeled[pos]).collect();
    chosen.sort_unstable();
    Ok(chosen)
}
