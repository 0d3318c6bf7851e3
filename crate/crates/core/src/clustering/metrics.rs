//! Fit quality: silhouette, one-vs-rest ROC AUC against known labels, and
//! the adjusted Rand index.

use std::collections::BTreeMap;

use serde::Serialize;

use super::lloyd::squared_distance;
use super::{Assignment, ClusterError, ClusterModel};
use crate::profiles::FeatureVector;

/// Mean silhouette coefficient. Points alone in their cluster score 0.
pub fn silhouette_points(points: &[Vec<f64>], labels: &[usize]) -> Result<f64, ClusterError> {
    if points.len() != labels.len() {
        return Err(ClusterError::LengthMismatch { expected: points.len(), found: labels.len() });
    }
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *sizes.entry(l).or_default() += 1;
    }
    if sizes.len() < 2 {
        return Err(ClusterError::SingleCluster);
    }

    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let own = labels[i];
        if sizes[&own] == 1 {
            continue;
        }
        let mut sums: BTreeMap<usize, f64> = BTreeMap::new();
        for (j, q) in points.iter().enumerate() {
            if i != j {
                *sums.entry(labels[j]).or_default() += squared_distance(p, q).sqrt();
            }
        }
        let a = sums.get(&own).copied().unwrap_or(0.0) / (sizes[&own] - 1) as f64;
        let b = sums
            .iter()
            .filter(|(&l, _)| l != own)
            .map(|(l, s)| s / sizes[l] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / points.len() as f64)
}

pub fn silhouette(profiles: &[FeatureVector], assignments: &[Assignment]) -> Result<f64, ClusterError> {
    let points: Vec<Vec<f64>> = profiles.iter().map(|p| p.values.clone()).collect();
    let labels: Vec<usize> = assignments.iter().map(|a| a.cluster_index).collect();
    silhouette_points(&points, &labels)
}

/// Area under the ROC curve as the Mann–Whitney statistic: the probability a
/// random positive outscores a random negative, ties counting one half.
///
/// Returns `None` when either class is empty.
pub fn mann_whitney_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // average 1-based ranks over tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += avg_rank * order[i..=j].iter().filter(|&&idx| positive[idx]).count() as f64;
        i = j + 1;
    }
    let n_pos_f = n_pos as f64;
    Some((rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterAuc<L> {
    pub cluster: usize,
    /// Majority true label among the cluster's members.
    pub label: L,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocReport<L> {
    pub per_cluster: Vec<ClusterAuc<L>>,
    pub macro_auc: f64,
}

/// One-vs-rest AUC per non-empty cluster.
///
/// Each cluster is mapped to the majority label of its members (ties to the
/// smallest label) and scored with `-distance(x, centroid)`; positives are the
/// profiles carrying the mapped label. Clusters with no members are skipped.
pub fn roc_auc_vs_labels<L: Ord + Clone>(
    model: &ClusterModel,
    profiles: &[FeatureVector],
    labels: &[L],
) -> Result<RocReport<L>, ClusterError> {
    if profiles.len() != labels.len() {
        return Err(ClusterError::LabelCountMismatch { profiles: profiles.len(), labels: labels.len() });
    }
    let assignments = profiles.iter().map(|p| super::assign(model, p)).collect::<Result<Vec<_>, _>>()?;

    let mut per_cluster = Vec::new();
    for c in 0..model.k {
        let mut counts: BTreeMap<&L, usize> = BTreeMap::new();
        for (a, l) in assignments.iter().zip(labels) {
            if a.cluster_index == c {
                *counts.entry(l).or_default() += 1;
            }
        }
        let Some(max) = counts.values().copied().max() else { continue };
        let mapped = counts.iter().find(|(_, &n)| n == max).map(|(l, _)| (*l).clone()).expect("non-empty");

        let scores: Vec<f64> =
            profiles.iter().map(|p| -squared_distance(&p.values, &model.centroids[c]).sqrt()).collect();
        let positive: Vec<bool> = labels.iter().map(|l| *l == mapped).collect();
        let auc = mann_whitney_auc(&scores, &positive).ok_or(ClusterError::DegenerateClass { cluster: c })?;
        per_cluster.push(ClusterAuc { cluster: c, label: mapped, auc });
    }
    let macro_auc = per_cluster.iter().map(|c| c.auc).sum::<f64>() / per_cluster.len() as f64;
    Ok(RocReport { per_cluster, macro_auc })
}

fn pairs(n: usize) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index between two labelings of the same items.
///
/// Returns 1.0 when both labelings are trivial in the same way (one cluster,
/// or all singletons), where the index is otherwise undefined.
pub fn adjusted_rand_index<A: Ord, B: Ord>(a: &[A], b: &[B]) -> Result<f64, ClusterError> {
    if a.len() != b.len() {
        return Err(ClusterError::LengthMismatch { expected: a.len(), found: b.len() });
    }
    let mut table: BTreeMap<(&A, &B), usize> = BTreeMap::new();
    let mut rows: BTreeMap<&A, usize> = BTreeMap::new();
    let mut cols: BTreeMap<&B, usize> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&n| pairs(n)).sum();
    let sum_rows: f64 = rows.values().map(|&n| pairs(n)).sum();
    let sum_cols: f64 = cols.values().map(|&n| pairs(n)).sum();
    let total = pairs(a.len());
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_rows * sum_cols / total;
    let max = (sum_rows + sum_cols) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{Layout, Normalization};
    use proptest::prelude::*;

    /// Pairwise definition, independent of the rank formulation.
    fn auc_by_pairs(scores: &[f64], positive: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut n = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if positive[i] && !positive[j] {
                    n += 1.0;
                    wins += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
                }
            }
        }
        wins / n
    }

    #[test]
    fn auc_conventions() {
        assert_eq!(mann_whitney_auc(&[3.0, 2.0, 1.0], &[true, false, false]), Some(1.0));
        assert_eq!(mann_whitney_auc(&[1.0, 1.0, 1.0, 1.0], &[true, false, true, false]), Some(0.5));
        assert_eq!(mann_whitney_auc(&[1.0, 2.0], &[true, true]), None);
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_oracle(
            data in proptest::collection::vec((0i32..6, any::<bool>()), 2..40)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| f64::from(*s)).collect();
            let positive: Vec<bool> = data.iter().map(|(_, p)| *p).collect();
            match mann_whitney_auc(&scores, &positive) {
                Some(auc) => prop_assert!((auc - auc_by_pairs(&scores, &positive)).abs() < 1e-12),
                None => prop_assert!(positive.iter().all(|&p| p) || positive.iter().all(|&p| !p)),
            }
        }

        #[test]
        fn ari_is_label_permutation_invariant(labels in proptest::collection::vec(0usize..4, 2..30)) {
            let relabeled: Vec<usize> = labels.iter().map(|l| (l + 1) % 4).collect();
            prop_assert!((adjusted_rand_index(&labels, &relabeled).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ari_known_value() {
        // sklearn: adjusted_rand_score([0,0,1,1],[0,0,1,2]) = 0.5714285714285715
        let ari = adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 2]).unwrap();
        assert!((ari - 4.0 / 7.0).abs() < 1e-12);
    }

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new("p", v.to_vec(), Layout::Hourly24, Normalization::None)
    }

    fn a(i: usize) -> Assignment {
        Assignment { cluster_index: i, distance: 0.0 }
    }

    #[test]
    fn silhouette_examples() {
        assert_eq!(silhouette(&[fv(&[0.0]), fv(&[1.0])], &[a(0), a(1)]), Ok(0.0));
        assert_eq!(silhouette(&[fv(&[0.0]), fv(&[1.0])], &[a(0), a(0)]), Err(ClusterError::SingleCluster));
        // {0, 1} | {10}: s = 9/10, 8/9, and 0 for the singleton
        let s = silhouette(&[fv(&[0.0]), fv(&[1.0]), fv(&[10.0])], &[a(0), a(0), a(1)]).unwrap();
        let expected = ((10.0 - 1.0) / 10.0 + (9.0 - 1.0) / 9.0 + 0.0) / 3.0;
        assert!((s - expected).abs() < 1e-12);
    }

    #[test]
    fn roc_errors() {
        let model = ClusterModel {
            k: 2,
            layout: Layout::Hourly24,
            normalization: Normalization::None,
            tolerance: 0.0,
            seed_used: 0,
            wcss: 0.0,
            iterations_run: 1,
            converged: true,
            centroids: vec![vec![0.0], vec![10.0]],
        };
        let profiles = vec![fv(&[0.0]), fv(&[10.0])];
        assert!(matches!(roc_auc_vs_labels(&model, &profiles, &[1]), Err(ClusterError::LabelCountMismatch { .. })));
        assert_eq!(
            roc_auc_vs_labels(&model, &profiles, &["x", "x"]),
            Err(ClusterError::DegenerateClass { cluster: 0 })
        );
        let report = roc_auc_vs_labels(&model, &profiles, &["a", "b"]).unwrap();
        assert_eq!(report.macro_auc, 1.0);
        assert_eq!(report.per_cluster[1].label, "b");
    }
}
