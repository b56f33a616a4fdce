#![allow(dead_code)]

use std::path::PathBuf;

use ndarray::Array2;
use rand::Rng;
use splitnn::data::{Dataset, Task};

pub fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

/// Symmetric zero-diagonal distances. With `ties`, entries are drawn from a
/// handful of values so equal linkages are common.
pub fn random_distances(rng: &mut impl Rng, d: usize, ties: bool) -> Array2<f64> {
    let mut m = Array2::zeros((d, d));
    for i in 0..d {
        for j in i + 1..d {
            let v = if ties {
                rng.gen_range(0..4) as f64 * 0.25
            } else {
                rng.gen_range(0.0..2.0)
            };
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    m
}

/// Complete linkage by brute force: every step recomputes every cluster
/// pair's linkage as the maximum leaf-to-leaf distance and merges the
/// smallest, ties going to the lexicographically smallest id pair.
/// Returns `(smaller id, larger id, height)` per merge.
pub fn naive_complete_linkage(dist: &Array2<f64>) -> Vec<(usize, usize, f64)> {
    let d = dist.nrows();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..d).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::new();
    for step in 0..d.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize)> = None;
        let mut ids: Vec<usize> = clusters.iter().map(|c| c.0).collect();
        ids.sort_unstable();
        for (x, &a) in ids.iter().enumerate() {
            for &b in &ids[x + 1..] {
                let ma = &clusters.iter().find(|c| c.0 == a).unwrap().1;
                let mb = &clusters.iter().find(|c| c.0 == b).unwrap().1;
                let mut link = 0.0_f64;
                for &p in ma {
                    for &q in mb {
                        link = link.max(dist[[p, q]]);
                    }
                }
                if best.is_none_or(|(h, _, _)| link < h) {
                    best = Some((link, a, b));
                }
            }
        }
        let (h, a, b) = best.unwrap();
        let mut members = Vec::new();
        clusters.retain(|c| {
            if c.0 == a || c.0 == b {
                members.extend(&c.1);
                false
            } else {
                true
            }
        });
        clusters.push((d + step, members));
        merges.push((a, b, h));
    }
    merges
}

/// Flat labels after applying every merge with height at most `threshold`,
/// numbered by first appearance.
pub fn naive_partition(d: usize, merges: &[(usize, usize, f64)], threshold: f64) -> Vec<usize> {
    let mut members: Vec<Vec<usize>> = (0..d).map(|i| vec![i]).collect();
    let mut label: Vec<usize> = (0..d).collect();
    for (s, &(a, b, h)) in merges.iter().enumerate() {
        let mut m = members[a].clone();
        m.extend(&members[b]);
        if h <= threshold {
            let root = m.iter().map(|&i| label[i]).min().unwrap();
            for &i in &m {
                label[i] = root;
            }
        }
        members.push(m);
        debug_assert_eq!(members.len(), d + s + 1);
    }
    canonical(&label)
}

pub fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut seen: Vec<usize> = Vec::new();
    labels
        .iter()
        .map(|l| match seen.iter().position(|s| s == l) {
            Some(p) => p,
            None => {
                seen.push(*l);
                seen.len() - 1
            }
        })
        .collect()
}

/// Binary classification where features 0-1 and 2-3 form correlated
/// informative pairs, feature 4 is noise, and about `missing` of the cells
/// are absent.
pub fn toy_classification(n: usize, missing: f64, rng: &mut impl Rng) -> Dataset {
    let mut x = Array2::zeros((n, 5));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let c = (i % 2) as f64;
        let a: f64 = rng.gen_range(-1.0..1.0);
        let b: f64 = rng.gen_range(-1.0..1.0);
        x[[i, 0]] = c + a;
        x[[i, 1]] = c + a + rng.gen_range(-0.2..0.2);
        x[[i, 2]] = c - b;
        x[[i, 3]] = c - b + rng.gen_range(-0.2..0.2);
        x[[i, 4]] = rng.gen_range(-1.0..1.0);
        for j in 0..5 {
            if rng.gen_bool(missing) {
                x[[i, j]] = f64::NAN;
            }
        }
        y.push(c);
    }
    Dataset::from_nan_matrix("toy", x, y, Task::Classification { num_classes: 2 }).unwrap()
}
