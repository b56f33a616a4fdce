use serde::{Deserialize, Serialize};

use super::DistanceMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// The smaller of the two merged node ids.
    pub left: usize,
    pub right: usize,
    pub height: f64,
    /// Id of the new internal node; the `s`-th merge creates node `d + s`.
    pub node: usize,
}

/// Agglomerative merge history. Leaves are `0..d`, internal nodes `d..2d-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    num_leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn num_leaves(&self) -> usize {
        self.num_leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn max_height(&self) -> f64 {
        self.merges.iter().map(|m| m.height).fold(0.0, f64::max)
    }

    /// One `left right height` line per merge.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for m in &self.merges {
            out.push_str(&format!("{} {} {}\n", m.left, m.right, m.height));
        }
        out
    }
}

/// Complete-linkage agglomerative clustering.
///
/// Each step merges the active pair with the smallest linkage distance,
/// breaking ties by the lexicographically smallest `(smaller id, larger id)`
/// pair. Linkages are updated with the complete-linkage rule
/// `D(a ∪ b, c) = max(D(a, c), D(b, c))`.
pub fn complete_linkage(dist: &DistanceMatrix) -> Dendrogram {
    let d = dist.size();
    assert!(d >= 2, "need at least two features to cluster");
    let total = 2 * d - 1;
    let mut link = vec![f64::INFINITY; total * total];
    for i in 0..d {
        for j in 0..d {
            link[i * total + j] = dist.get(i, j);
        }
    }
    // Node ids are created in increasing order, so `active` stays sorted.
    let mut active: Vec<usize> = (0..d).collect();
    let mut merges = Vec::with_capacity(d - 1);
    for step in 0..d - 1 {
        let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                let v = link[a * total + b];
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        let (height, a, b) = best;
        let node = d + step;
        active.retain(|&x| x != a && x != b);
        for &c in &active {
            let v = link[a * total + c].max(link[b * total + c]);
            link[node * total + c] = v;
            link[c * total + node] = v;
        }
        active.push(node);
        merges.push(Merge {
            left: a,
            right: b,
            height,
            node,
        });
    }
    Dendrogram { num_leaves: d, merges }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn two_features_single_merge() {
        let dist = DistanceMatrix::new(array![[0.0, 0.7], [0.7, 0.0]]).unwrap();
        let tree = complete_linkage(&dist);
        assert_eq!(
            tree.merges(),
            &[Merge {
                left: 0,
                right: 1,
                height: 0.7,
                node: 2
            }]
        );
    }

    #[test]
    fn equal_distances_follow_tie_rule() {
        let dist = DistanceMatrix::new(Array2::from_shape_fn((4, 4), |(i, j)| if i == j { 0.0 } else { 0.5 })).unwrap();
        let tree = complete_linkage(&dist);
        let pairs: Vec<(usize, usize)> = tree.merges().iter().map(|m| (m.left, m.right)).collect();
        assert_eq!(pairs, vec![(0, 1), (2, 3), (4, 5)]);
    }

    #[test]
    fn linkage_is_the_maximum() {
        // 0-1 merge first at 0.1; the new node's distance to 2 is max(0.3, 0.9).
        let dist = DistanceMatrix::new(array![[0.0, 0.1, 0.3], [0.1, 0.0, 0.9], [0.3, 0.9, 0.0]]).unwrap();
        let tree = complete_linkage(&dist);
        assert_eq!(tree.merges()[1].height, 0.9);
        assert_eq!(tree.to_text(), "0 1 0.1\n2 3 0.9\n");
    }
}
