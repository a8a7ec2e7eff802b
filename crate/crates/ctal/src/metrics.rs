//! Evaluation metrics and statistics: balanced accuracy, Shannon entropy,
//! and the two-sided Wilcoxon rank-sum test.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Square confusion matrix; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
    n_classes: usize,
}

impl ConfusionMatrix {
    /// Tallies predictions against ground truth.
    pub fn from_predictions(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<Self> {
        if y_true.is_empty() {
            return Err(Error::EmptySample);
        }
        if y_true.len() != y_pred.len() {
            return Err(Error::DimensionMismatch {
                expected: y_true.len(),
                found: y_pred.len(),
            });
        }
        let mut counts = vec![vec![0usize; n_classes]; n_classes];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            if t >= n_classes {
                return Err(Error::ClassOutOfRange { id: t, n_classes });
            }
            if p >= n_classes {
                return Err(Error::ClassOutOfRange { id: p, n_classes });
            }
            counts[t][p] += 1;
        }
        Ok(Self { counts, n_classes })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Count of samples with true class `t` predicted as `p`.
    pub fn count(&self, t: usize, p: usize) -> usize {
        self.counts[t][p]
    }

    /// Total number of tallied samples.
    pub fn total(&self) -> usize {
        self.counts.iter().map(|row| row.iter().sum::<usize>()).sum()
    }

    /// Recall of one class, or `None` if the class never occurs in `y_true`.
    pub fn recall(&self, class: usize) -> Option<f64> {
        let row_total: usize = self.counts[class].iter().sum();
        if row_total == 0 {
            None
        } else {
            Some(self.counts[class][class] as f64 / row_total as f64)
        }
    }

    /// Unweighted mean of per-class recall over the classes present in
    /// `y_true`. At two classes this is the mean of the true positive rate
    /// and the true negative rate.
    pub fn balanced_accuracy(&self) -> f64 {
        let recalls: Vec<f64> = (0..self.n_classes).filter_map(|c| self.recall(c)).collect();
        recalls.iter().sum::<f64>() / recalls.len() as f64
    }
}

/// Balanced accuracy of predictions: macro-averaged recall, with classes
/// absent from `y_true` excluded from the mean.
pub fn balanced_accuracy(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<f64> {
    Ok(ConfusionMatrix::from_predictions(y_true, y_pred, n_classes)?.balanced_accuracy())
}

/// Shannon entropy in bits of a probability vector, with `0·log 0 = 0`.
///
/// Entries must be non-negative and sum to 1 within `1e-9`.
pub fn shannon_entropy(probabilities: &[f64]) -> Result<f64> {
    if probabilities.is_empty() {
        return Err(Error::InvalidProbabilities("empty vector".into()));
    }
    let mut sum = 0.0;
    for &p in probabilities {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidProbabilities(format!("entry {p} is not a probability")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidProbabilities(format!("entries sum to {sum}, not 1")));
    }
    Ok(probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum())
}

/// Shannon entropy in bits of a count histogram. Zero for an empty or
/// single-class histogram.
pub fn entropy_from_counts(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum()
}

/// Outcome of a two-sided Wilcoxon rank-sum test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSumResult {
    /// Mann-Whitney U statistic of the first sample.
    pub statistic: f64,
    /// Two-sided p-value in `[0, 1]`.
    pub p_value: f64,
    /// Whether `p_value < 0.05`.
    pub significant: bool,
}

/// Computation path for the rank-sum p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankSumMethod {
    /// Exact enumeration of all rank splits. Cost grows with both sample
    /// sizes; intended for small samples.
    Exact,
    /// Normal approximation with tie-corrected variance and continuity
    /// correction.
    NormalApprox,
}

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) test.
///
/// Ties receive mid-ranks. Samples with at least 8 observations on each side
/// use the normal approximation; smaller samples are tested exactly.
pub fn wilcoxon_rank_sum(sample_a: &[f64], sample_b: &[f64]) -> Result<RankSumResult> {
    let method = if sample_a.len() >= 8 && sample_b.len() >= 8 {
        RankSumMethod::NormalApprox
    } else {
        RankSumMethod::Exact
    };
    wilcoxon_rank_sum_with(sample_a, sample_b, method)
}

/// Two-sided Wilcoxon rank-sum test with an explicit computation path.
pub fn wilcoxon_rank_sum_with(
    sample_a: &[f64],
    sample_b: &[f64],
    method: RankSumMethod,
) -> Result<RankSumResult> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::EmptySample);
    }
    let n1 = sample_a.len();
    let n2 = sample_b.len();

    // Pooled mid-ranks, doubled so that tied ranks stay integral.
    let mut pooled: Vec<(f64, bool)> = sample_a
        .iter()
        .map(|&v| (v, true))
        .chain(sample_b.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("non-finite sample value"));

    let n = n1 + n2;
    let mut doubled_ranks = vec![0u64; n];
    let mut tie_sizes: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        // positions i+1..=j share mid-rank (i+1+j)/2; doubled: i+1+j
        let doubled = (i + 1 + j) as u64;
        for r in doubled_ranks.iter_mut().take(j).skip(i) {
            *r = doubled;
        }
        tie_sizes.push(j - i);
        i = j;
    }

    let doubled_rank_sum_a: u64 = pooled
        .iter()
        .zip(&doubled_ranks)
        .filter(|((_, is_a), _)| *is_a)
        .map(|(_, &r)| r)
        .sum();
    let rank_sum_a = doubled_rank_sum_a as f64 / 2.0;
    let u = rank_sum_a - (n1 * (n1 + 1)) as f64 / 2.0;
    let mean_u = (n1 * n2) as f64 / 2.0;

    let p_value = match method {
        RankSumMethod::NormalApprox => {
            let nf = n as f64;
            let tie_term: f64 = tie_sizes
                .iter()
                .map(|&t| {
                    let t = t as f64;
                    t * t * t - t
                })
                .sum();
            let variance =
                (n1 * n2) as f64 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
            if variance <= 0.0 {
                // All observations tied; no evidence of a difference.
                1.0
            } else {
                let diff = u - mean_u;
                let corrected = if diff > 0.0 {
                    diff - 0.5
                } else if diff < 0.0 {
                    diff + 0.5
                } else {
                    0.0
                };
                let z = corrected / variance.sqrt();
                let normal = Normal::new(0.0, 1.0).expect("unit normal");
                (2.0 * (1.0 - normal.cdf(z.abs()))).clamp(0.0, 1.0)
            }
        }
        RankSumMethod::Exact => exact_two_sided_p(&doubled_ranks, n1, u, mean_u),
    };

    Ok(RankSumResult {
        statistic: u,
        p_value,
        significant: p_value < 0.05,
    })
}

/// Exact two-sided p-value: the fraction of the C(n, n1) equally likely rank
/// splits whose U deviates from its mean at least as much as the observed U.
///
/// Counts subsets by (size, doubled-rank-sum) with dynamic programming, so
/// ties are handled exactly through the shared mid-ranks.
fn exact_two_sided_p(doubled_ranks: &[u64], n1: usize, u_observed: f64, mean_u: f64) -> f64 {
    let max_sum: usize = {
        let mut sorted = doubled_ranks.to_vec();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        sorted.iter().take(n1).sum::<u64>() as usize
    };

    // ways[m][s]: number of size-m subsets of the processed prefix whose
    // doubled ranks sum to s. Counts are exact in f64 far beyond any size
    // the automatic path selects.
    let mut ways = vec![vec![0.0f64; max_sum + 1]; n1 + 1];
    ways[0][0] = 1.0;
    for &r in doubled_ranks {
        let r = r as usize;
        for m in (0..n1).rev() {
            for s in 0..=max_sum.saturating_sub(r) {
                if ways[m][s] > 0.0 {
                    ways[m + 1][s + r] += ways[m][s];
                }
            }
        }
    }

    let offset = (n1 * (n1 + 1)) as f64 / 2.0;
    let observed_dev = (u_observed - mean_u).abs();
    let mut tail = 0.0;
    let mut total = 0.0;
    for (s, &count) in ways[n1].iter().enumerate() {
        if count == 0.0 {
            continue;
        }
        total += count;
        let u = s as f64 / 2.0 - offset;
        if (u - mean_u).abs() >= observed_dev - 1e-9 {
            tail += count;
        }
    }
    (tail / total).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn balanced_accuracy_matches_rate_average() {
        // TP=50, FN=10, TN=30, FP=10 with class 0 positive:
        // (50/60 + 30/40) / 2
        let mut y_true = vec![0usize; 60];
        y_true.extend(vec![1usize; 40]);
        let mut y_pred = vec![0usize; 50];
        y_pred.extend(vec![1usize; 10]); // 10 false negatives
        y_pred.extend(vec![0usize; 10]); // 10 false positives
        y_pred.extend(vec![1usize; 30]);
        let acc = balanced_accuracy(&y_true, &y_pred, 2).unwrap();
        assert_abs_diff_eq!(acc, (50.0 / 60.0 + 30.0 / 40.0) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(acc, 0.7916666666666667, epsilon = 1e-12);
    }

    #[test]
    fn balanced_accuracy_perfect_predictions() {
        let y = vec![0, 1, 2, 1, 0, 2];
        assert_abs_diff_eq!(balanced_accuracy(&y, &y, 3).unwrap(), 1.0);
    }

    #[test]
    fn balanced_accuracy_constant_predictor_is_half() {
        let y_true = vec![0, 0, 0, 1, 1, 1, 1, 1, 1, 1];
        let y_pred = vec![1; 10];
        assert_abs_diff_eq!(balanced_accuracy(&y_true, &y_pred, 2).unwrap(), 0.5);
    }

    #[test]
    fn balanced_accuracy_ignores_absent_classes() {
        let y_true = vec![0, 0, 2, 2];
        let y_pred = vec![0, 2, 2, 2];
        // class 1 absent: mean of recalls 0.5 and 1.0
        assert_abs_diff_eq!(balanced_accuracy(&y_true, &y_pred, 3).unwrap(), 0.75);
    }

    #[test]
    fn balanced_accuracy_invariant_to_relabeling() {
        let y_true = vec![0, 1, 1, 2, 0, 2, 2, 1];
        let y_pred = vec![0, 1, 2, 2, 1, 2, 0, 1];
        // permutation 0->2, 1->0, 2->1
        let perm = [2usize, 0, 1];
        let t2: Vec<usize> = y_true.iter().map(|&c| perm[c]).collect();
        let p2: Vec<usize> = y_pred.iter().map(|&c| perm[c]).collect();
        assert_abs_diff_eq!(
            balanced_accuracy(&y_true, &y_pred, 3).unwrap(),
            balanced_accuracy(&t2, &p2, 3).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(balanced_accuracy(&[], &[], 2).is_err());
        assert!(wilcoxon_rank_sum(&[], &[1.0]).is_err());
    }

    #[test]
    fn entropy_worked_values() {
        assert_abs_diff_eq!(shannon_entropy(&[0.5, 0.5]).unwrap(), 1.0);
        assert_abs_diff_eq!(shannon_entropy(&[1.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            shannon_entropy(&[0.25, 0.75]).unwrap(),
            0.8112781244591328,
            epsilon = 1e-12
        );
    }

    #[test]
    fn entropy_rejects_invalid_vectors() {
        assert!(shannon_entropy(&[0.5, 0.4]).is_err());
        assert!(shannon_entropy(&[1.2, -0.2]).is_err());
        assert!(shannon_entropy(&[]).is_err());
        assert!(shannon_entropy(&[f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn entropy_maximized_at_uniform() {
        for c in 2..6 {
            let uniform = vec![1.0 / c as f64; c];
            assert_abs_diff_eq!(
                shannon_entropy(&uniform).unwrap(),
                (c as f64).log2(),
                epsilon = 1e-12
            );
            let mut skewed = uniform.clone();
            skewed[0] += 0.1;
            skewed[1] -= 0.1;
            assert!(shannon_entropy(&skewed).unwrap() < (c as f64).log2());
        }
    }

    #[test]
    fn counts_entropy_agrees_with_probability_entropy() {
        let counts = [3usize, 1, 0, 4];
        let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / 8.0).collect();
        assert_abs_diff_eq!(
            entropy_from_counts(&counts),
            shannon_entropy(&probs).unwrap(),
            epsilon = 1e-12
        );
        assert_eq!(entropy_from_counts(&[0, 7, 0]), 0.0);
        assert_eq!(entropy_from_counts(&[]), 0.0);
    }

    #[test]
    fn rank_sum_identical_samples_not_significant() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(r.p_value > 0.9);
        assert!(!r.significant);
    }

    #[test]
    fn rank_sum_exact_separated_triples() {
        // All 20 splits of 6 ranks; only the two extreme splits deviate as
        // much as the observed one: p = 2/20.
        let r = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0]).unwrap();
        assert_abs_diff_eq!(r.p_value, 0.1, epsilon = 1e-12);
        assert!(!r.significant);
    }

    #[test]
    fn rank_sum_interleaved_is_not_significant() {
        let a: Vec<f64> = (0..8).map(|i| (2 * i + 1) as f64).collect();
        let b: Vec<f64> = (0..8).map(|i| (2 * i + 2) as f64).collect();
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        assert!(r.p_value > 0.5, "p = {}", r.p_value);
    }

    #[test]
    fn rank_sum_is_symmetric() {
        let a = [0.9, 0.7, 0.8, 0.95, 0.6];
        let b = [0.5, 0.55, 0.65, 0.4];
        let ab = wilcoxon_rank_sum(&a, &b).unwrap();
        let ba = wilcoxon_rank_sum(&b, &a).unwrap();
        assert_abs_diff_eq!(ab.p_value, ba.p_value, epsilon = 1e-12);
    }

    /// Brute-force enumeration over all C(n, n1) index subsets; independent
    /// of the DP used by the exact path.
    fn brute_force_exact_p(a: &[f64], b: &[f64]) -> f64 {
        let pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
        let n = pooled.len();
        let n1 = a.len();
        // mid-ranks of the pooled values
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| pooled[x].partial_cmp(&pooled[y]).unwrap());
        let mut ranks = vec![0.0; n];
        let mut i = 0;
        while i < n {
            let mut j = i + 1;
            while j < n && pooled[order[j]] == pooled[order[i]] {
                j += 1;
            }
            let mid = (i + 1 + j) as f64 / 2.0;
            for &idx in &order[i..j] {
                ranks[idx] = mid;
            }
            i = j;
        }
        let mean_u = (n1 * (n - n1)) as f64 / 2.0;
        let observed: f64 =
            ranks[..n1].iter().sum::<f64>() - (n1 * (n1 + 1)) as f64 / 2.0;
        let observed_dev = (observed - mean_u).abs();

        let mut tail = 0usize;
        let mut total = 0usize;
        let mut subset: Vec<usize> = Vec::new();
        #[allow(clippy::too_many_arguments)]
        fn recurse(
            start: usize,
            need: usize,
            n: usize,
            ranks: &[f64],
            subset: &mut Vec<usize>,
            n1: usize,
            mean_u: f64,
            observed_dev: f64,
            tail: &mut usize,
            total: &mut usize,
        ) {
            if need == 0 {
                let rs: f64 = subset.iter().map(|&i| ranks[i]).sum();
                let u = rs - (n1 * (n1 + 1)) as f64 / 2.0;
                *total += 1;
                if (u - mean_u).abs() >= observed_dev - 1e-9 {
                    *tail += 1;
                }
                return;
            }
            for i in start..=(n - need) {
                subset.push(i);
                recurse(i + 1, need - 1, n, ranks, subset, n1, mean_u, observed_dev, tail, total);
                subset.pop();
            }
        }
        recurse(0, n1, n, &ranks, &mut subset, n1, mean_u, observed_dev, &mut tail, &mut total);
        tail as f64 / total as f64
    }

    #[test]
    fn exact_path_matches_brute_force_enumeration() {
        use rand::Rng;
        let mut rng = crate::seeding::rng_from_seed(99);
        for case in 0..30 {
            let n1 = rng.random_range(1..6);
            let n2 = rng.random_range(1..6);
            // Small integer grid forces plenty of ties.
            let a: Vec<f64> = (0..n1).map(|_| rng.random_range(0..5) as f64).collect();
            let b: Vec<f64> = (0..n2).map(|_| rng.random_range(0..5) as f64).collect();
            let dp = wilcoxon_rank_sum_with(&a, &b, RankSumMethod::Exact)
                .unwrap()
                .p_value;
            let brute = brute_force_exact_p(&a, &b);
            assert_abs_diff_eq!(dp, brute, epsilon = 1e-9);
            let _ = case;
        }
    }

    #[test]
    fn exact_and_approx_agree_at_eight_per_side() {
        use rand::Rng;
        let mut rng = crate::seeding::rng_from_seed(7);
        for _ in 0..50 {
            // Continuous draws: tie-free with probability 1.
            let a: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..8).map(|_| rng.random::<f64>() + 0.2).collect();
            let exact = wilcoxon_rank_sum_with(&a, &b, RankSumMethod::Exact).unwrap();
            let approx = wilcoxon_rank_sum_with(&a, &b, RankSumMethod::NormalApprox).unwrap();
            assert!(
                (exact.p_value - approx.p_value).abs() <= 0.02,
                "exact {} vs approx {}",
                exact.p_value,
                approx.p_value
            );
        }
    }

    #[test]
    fn all_tied_observations_give_p_one() {
        let a = [5.0; 10];
        let b = [5.0; 12];
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        assert_abs_diff_eq!(r.p_value, 1.0);
    }
}
