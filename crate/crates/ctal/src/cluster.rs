//! k-means clustering and the diversity-versus-representativeness selection step.
//!
//! Strategies that pick spread-out yet typical samples do it in two stages:
//! cluster the candidate pool with k-means, then run a coordinate-ascent
//! sweep that, per cluster, selects the member maximizing diversity minus
//! representativeness. Diversity is the minimum distance to the anchor set
//! (labeled samples plus the current selections of the other clusters);
//! representativeness is the mean distance to the other cluster members.
//!
//! All distances are Euclidean and expected to run on standardized
//! features; raw heterogeneous units would let one feature dominate.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::seeding::rng_from_seed;

/// Default Lloyd iteration cap.
pub const DEFAULT_KMEANS_MAX_ITERS: usize = 100;
/// Default centroid-shift tolerance for Lloyd convergence.
pub const DEFAULT_KMEANS_TOL: f64 = 1e-6;

/// Squared Euclidean distance between a sample row and a centroid.
fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Euclidean distance between two sample rows.
pub fn euclidean_distance(features: ArrayView2<'_, f64>, a: usize, b: usize) -> f64 {
    squared_distance(features.row(a), features.row(b)).sqrt()
}

/// Result of a k-means run over a set of sample indices.
#[derive(Debug, Clone)]
pub struct Clustering {
    pub k: usize,
    /// The clustered sample indices, in input order.
    pub indices: Vec<usize>,
    /// Cluster id per entry of `indices`; no cluster is empty.
    pub assignment: Vec<usize>,
    /// `k × D` centroid matrix.
    pub centroids: Array2<f64>,
    /// Sum of squared distances to assigned centroids.
    pub inertia: f64,
    /// Inertia after each Lloyd iteration; non-increasing.
    pub inertia_history: Vec<f64>,
}

/// One cluster as consumed by [`divrep_optimize`]: member sample indices
/// plus the centroid they were clustered around.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub members: Vec<usize>,
    pub centroid: Vec<f64>,
}

impl Clustering {
    /// Splits the clustering into per-cluster member lists, preserving
    /// cluster order.
    pub fn clusters(&self) -> Vec<Cluster> {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); self.k];
        for (pos, &cluster) in self.assignment.iter().enumerate() {
            members[cluster].push(self.indices[pos]);
        }
        members
            .into_iter()
            .enumerate()
            .map(|(cluster, members)| Cluster {
                members,
                centroid: self.centroids.row(cluster).to_vec(),
            })
            .collect()
    }
}

/// k-means over the rows selected by `indices`.
///
/// Seeding is k-means++; Lloyd iterations run until the largest centroid
/// shift drops below `tol` or `max_iters` is reached. A cluster left empty
/// by an assignment step is repaired by moving in the point farthest from
/// its current centroid. Deterministic given the seed.
pub fn kmeans(
    features: ArrayView2<'_, f64>,
    indices: &[usize],
    k: usize,
    rng_seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<Clustering> {
    let n = indices.len();
    if k == 0 || k > n {
        return Err(Error::BadClusterCount { k, n });
    }
    let d = features.ncols();
    let mut rng = rng_from_seed(rng_seed);

    // k-means++ seeding: each next center drawn with probability
    // proportional to the squared distance to the nearest chosen center.
    let mut centroids = Array2::zeros((k, d));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&features.row(indices[first]));
    let mut nearest_sq: Vec<f64> = (0..n)
        .map(|pos| squared_distance(features.row(indices[pos]), centroids.row(0)))
        .collect();
    for center in 1..k {
        let total: f64 = nearest_sq.iter().sum();
        let chosen = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (pos, &w) in nearest_sq.iter().enumerate() {
                acc += w;
                if target < acc {
                    chosen = Some(pos);
                    break;
                }
            }
            chosen.unwrap_or_else(|| {
                nearest_sq
                    .iter()
                    .rposition(|&w| w > 0.0)
                    .expect("total weight is positive")
            })
        } else {
            // All remaining points coincide with chosen centers.
            rng.random_range(0..n)
        };
        centroids
            .row_mut(center)
            .assign(&features.row(indices[chosen]));
        for (pos, d2) in nearest_sq.iter_mut().enumerate() {
            let cand = squared_distance(features.row(indices[pos]), centroids.row(center));
            if cand < *d2 {
                *d2 = cand;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    let mut inertia_history = Vec::new();
    let mut inertia = f64::INFINITY;
    for _ in 0..max_iters {
        // Assign each point to its nearest centroid, lowest id on ties.
        let mut assigned_sq = vec![0.0f64; n];
        for pos in 0..n {
            let row = features.row(indices[pos]);
            let mut best = 0;
            let mut best_sq = squared_distance(row, centroids.row(0));
            for cluster in 1..k {
                let sq = squared_distance(row, centroids.row(cluster));
                if sq < best_sq {
                    best_sq = sq;
                    best = cluster;
                }
            }
            assignment[pos] = best;
            assigned_sq[pos] = best_sq;
        }

        // Repair empty clusters by stealing the farthest point from any
        // cluster that can spare one.
        let mut sizes = vec![0usize; k];
        for &cluster in &assignment {
            sizes[cluster] += 1;
        }
        for empty in 0..k {
            while sizes[empty] == 0 {
                let farthest = (0..n)
                    .filter(|&pos| sizes[assignment[pos]] >= 2)
                    .max_by(|&a, &b| {
                        assigned_sq[a]
                            .partial_cmp(&assigned_sq[b])
                            .expect("distances are finite")
                            .then(b.cmp(&a))
                    })
                    .expect("a donor cluster always exists when k <= n");
                sizes[assignment[farthest]] -= 1;
                assignment[farthest] = empty;
                sizes[empty] += 1;
                assigned_sq[farthest] = 0.0;
            }
        }

        // Move centroids to their cluster means.
        let mut sums = Array2::<f64>::zeros((k, d));
        for pos in 0..n {
            let row = features.row(indices[pos]);
            for (j, &v) in row.iter().enumerate() {
                sums[[assignment[pos], j]] += v;
            }
        }
        let mut shift: f64 = 0.0;
        for cluster in 0..k {
            let mut moved = 0.0;
            for j in 0..d {
                let mean = sums[[cluster, j]] / sizes[cluster] as f64;
                let delta = mean - centroids[[cluster, j]];
                moved += delta * delta;
                centroids[[cluster, j]] = mean;
            }
            shift = shift.max(moved.sqrt());
        }

        inertia = (0..n)
            .map(|pos| squared_distance(features.row(indices[pos]), centroids.row(assignment[pos])))
            .sum();
        inertia_history.push(inertia);
        if shift < tol {
            break;
        }
    }

    Ok(Clustering {
        k,
        indices: indices.to_vec(),
        assignment,
        centroids,
        inertia,
        inertia_history,
    })
}

/// Mean Euclidean distance from `j` to the other members of its cluster;
/// 0 for a singleton cluster.
pub fn representativeness(
    features: ArrayView2<'_, f64>,
    j: usize,
    cluster_members: &[usize],
) -> Result<f64> {
    if !cluster_members.contains(&j) {
        return Err(Error::NotAClusterMember { index: j });
    }
    if cluster_members.len() < 2 {
        return Ok(0.0);
    }
    let total: f64 = cluster_members
        .iter()
        .filter(|&&m| m != j)
        .map(|&m| euclidean_distance(features, j, m))
        .sum();
    Ok(total / (cluster_members.len() - 1) as f64)
}

/// Minimum Euclidean distance from `j` to any anchor; positive infinity
/// when there are no anchors.
pub fn diversity(features: ArrayView2<'_, f64>, j: usize, anchor_indices: &[usize]) -> f64 {
    anchor_indices
        .iter()
        .map(|&a| euclidean_distance(features, j, a))
        .fold(f64::INFINITY, f64::min)
}

/// Outcome of the diversity-versus-representativeness sweep.
#[derive(Debug, Clone)]
pub struct SelectionState {
    /// One selected member per cluster, in cluster order.
    pub selected: Vec<usize>,
    /// Final anchor set: the labeled anchors plus every selection, sorted.
    pub anchors: Vec<usize>,
    /// Coordinate-ascent rounds executed before convergence or the cap.
    pub rounds: usize,
}

/// Picks one member per cluster maximizing diversity minus
/// representativeness.
///
/// Selections start at the member closest to each centroid. Each round
/// then sweeps the clusters in order, re-scoring every member of cluster
/// ℓ against the anchors (`labeled_anchors` plus the selections of the
/// other clusters) and keeping the argmax; ties go to the lowest index.
/// With no anchors at all the score reduces to the most representative
/// member. The sweep stops when a full round changes nothing or after
/// `max_rounds`. Fully deterministic; `rng_seed` is reserved.
pub fn divrep_optimize(
    features: ArrayView2<'_, f64>,
    clusters: &[Cluster],
    labeled_anchors: &[usize],
    rng_seed: u64,
    max_rounds: usize,
) -> Result<SelectionState> {
    let _ = rng_seed;
    for cluster in clusters {
        if cluster.members.is_empty() {
            return Err(Error::EmptySample);
        }
    }

    // Representativeness of a member never changes across rounds.
    let repr: Vec<Vec<f64>> = clusters
        .iter()
        .map(|cluster| {
            cluster
                .members
                .iter()
                .map(|&j| representativeness(features, j, &cluster.members))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    // Start from the member closest to each centroid, lowest index on ties.
    let mut selected: Vec<usize> = clusters
        .iter()
        .map(|cluster| {
            let centroid = ArrayView1::from(cluster.centroid.as_slice());
            let mut best = cluster.members[0];
            let mut best_sq = f64::INFINITY;
            for &j in &cluster.members {
                let sq = squared_distance(features.row(j), centroid);
                if sq < best_sq || (sq == best_sq && j < best) {
                    best_sq = sq;
                    best = j;
                }
            }
            best
        })
        .collect();

    let mut rounds = 0;
    let mut anchors = Vec::with_capacity(labeled_anchors.len() + clusters.len());
    while rounds < max_rounds {
        rounds += 1;
        let mut changed = false;
        for cluster_id in 0..clusters.len() {
            anchors.clear();
            anchors.extend_from_slice(labeled_anchors);
            anchors.extend(
                selected
                    .iter()
                    .enumerate()
                    .filter(|&(other, _)| other != cluster_id)
                    .map(|(_, &j)| j),
            );
            let mut best = None;
            let mut best_score = f64::NEG_INFINITY;
            for (pos, &j) in clusters[cluster_id].members.iter().enumerate() {
                let score = if anchors.is_empty() {
                    -repr[cluster_id][pos]
                } else {
                    diversity(features, j, &anchors) - repr[cluster_id][pos]
                };
                let better = score > best_score
                    || (score == best_score && best.is_some_and(|b| j < b));
                if best.is_none() || better {
                    best_score = score;
                    best = Some(j);
                }
            }
            let best = best.expect("clusters are non-empty");
            if best != selected[cluster_id] {
                selected[cluster_id] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut anchors: Vec<usize> = labeled_anchors
        .iter()
        .copied()
        .chain(selected.iter().copied())
        .collect();
    anchors.sort_unstable();
    anchors.dedup();
    Ok(SelectionState {
        selected,
        anchors,
        rounds,
    })
}
