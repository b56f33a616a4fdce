//! Feature clustering: Pearson correlation distance, complete linkage and a
//! dendrogram cut relative to the tallest merge.

mod distance;
mod linkage;

pub use distance::{correlation_distance, pairwise_complete_pearson, DistanceMatrix, DistanceMode};
pub use linkage::{complete_linkage, Dendrogram, Merge};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;

/// An exhaustive, disjoint partition of `d` features into `k` clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureClustering {
    assignment: Vec<usize>,
    k: usize,
    cluster_sizes: Vec<usize>,
    threshold_fraction: f64,
}

impl FeatureClustering {
    /// Builds a clustering from raw labels, relabelling clusters so ids
    /// follow the smallest feature index they contain.
    pub fn from_labels(labels: &[usize], threshold_fraction: f64) -> Self {
        assert!(!labels.is_empty(), "clustering needs at least one feature");
        let mut remap = std::collections::HashMap::new();
        let assignment: Vec<usize> = labels
            .iter()
            .map(|l| {
                let next = remap.len();
                *remap.entry(*l).or_insert(next)
            })
            .collect();
        let k = remap.len();
        let mut cluster_sizes = vec![0; k];
        for &c in &assignment {
            cluster_sizes[c] += 1;
        }
        FeatureClustering {
            assignment,
            k,
            cluster_sizes,
            threshold_fraction,
        }
    }

    /// Every feature in one cluster; the vanilla network's layout.
    pub fn single(d: usize) -> Self {
        FeatureClustering::from_labels(&vec![0; d], 1.0)
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.cluster_sizes
    }

    pub fn threshold_fraction(&self) -> f64 {
        self.threshold_fraction
    }

    pub fn n_features(&self) -> usize {
        self.assignment.len()
    }

    /// Feature indices of cluster `c`, ascending.
    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&j| self.assignment[j] == c)
            .collect()
    }

    /// One `feature_name cluster_id` line per feature.
    pub fn to_text(&self, feature_names: &[String]) -> String {
        self.assignment
            .iter()
            .zip(feature_names)
            .map(|(c, name)| format!("{name} {c}\n"))
            .collect()
    }
}

/// Flat clusters from applying every merge whose height is at most
/// `threshold_fraction × max height`.
pub fn cut_dendrogram(tree: &Dendrogram, threshold_fraction: f64) -> FeatureClustering {
    assert!(
        threshold_fraction > 0.0 && threshold_fraction <= 1.0,
        "threshold fraction must lie in (0, 1], got {threshold_fraction}"
    );
    let d = tree.num_leaves();
    let threshold = threshold_fraction * tree.max_height();
    let mut parent: Vec<usize> = (0..2 * d - 1).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for m in tree.merges() {
        if m.height <= threshold {
            let (a, b) = (find(&mut parent, m.left), find(&mut parent, m.right));
            parent[a] = m.node;
            parent[b] = m.node;
        }
    }
    let roots: Vec<usize> = (0..d).map(|j| find(&mut parent, j)).collect();
    FeatureClustering::from_labels(&roots, threshold_fraction)
}

/// Correlation distance, complete linkage and cut in one call, using only
/// the given rows.
pub fn cluster_features(
    data: &Dataset,
    rows: &[usize],
    mode: DistanceMode,
    threshold_fraction: f64,
) -> FeatureClustering {
    let tree = complete_linkage(&correlation_distance(data, rows, mode));
    cut_dendrogram(&tree, threshold_fraction)
}

/// Finds a threshold fraction whose cut yields exactly `k` clusters by
/// bisection, relying on `k` being non-increasing in the fraction. Returns
/// `None` when tied merge heights make `k` unreachable.
pub fn fraction_for_k(tree: &Dendrogram, k: usize) -> Option<f64> {
    let d = tree.num_leaves();
    if k == 0 || k > d {
        return None;
    }
    let clusters = |f: f64| cut_dendrogram(tree, f).k();
    if clusters(1.0) == k {
        return Some(1.0);
    }
    // Invariant: clusters(lo) > k >= clusters(hi).
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if clusters(mid) > k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (clusters(hi) == k).then_some(hi)
}
