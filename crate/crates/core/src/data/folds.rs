use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng, tag};

/// Outer fold assignment for nested cross-validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub num_outer_folds: usize,
    pub num_inner_folds: usize,
    /// Outer fold index of every row.
    pub assignments: Vec<usize>,
    pub seed: u64,
    #[serde(skip)]
    classes: Option<Vec<usize>>,
}

/// Assigns `n` items to `k` folds.
///
/// With class labels, each class is shuffled on its own and the classes are
/// laid end to end before dealing positions round-robin, so both the fold
/// sizes and every class's per-fold counts differ by at most one. Classes
/// with fewer than `k` members are pooled and shuffled together.
pub fn assign_folds(classes: Option<&[usize]>, n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng(seed);
    let order: Vec<usize> = match classes {
        None => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            idx
        }
        Some(labels) => {
            assert_eq!(labels.len(), n);
            let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, &c) in labels.iter().enumerate() {
                by_class.entry(c).or_default().push(i);
            }
            let mut order = Vec::with_capacity(n);
            let mut pool = Vec::new();
            for (class, mut members) in by_class {
                if members.len() < k {
                    log::warn!(
                        "class {class} has {} members, fewer than {k} folds; not stratified",
                        members.len()
                    );
                    pool.append(&mut members);
                    continue;
                }
                members.shuffle(&mut rng);
                order.extend(members);
            }
            pool.shuffle(&mut rng);
            order.extend(pool);
            order
        }
    };
    let mut folds = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % k;
    }
    folds
}

pub fn make_fold_plan(data: &Dataset, num_outer: usize, num_inner: usize, seed: u64) -> Result<FoldPlan> {
    let n = data.n_rows();
    if num_outer < 2 || num_inner < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 outer and 2 inner folds, got {num_outer} and {num_inner}"
        )));
    }
    if n < num_outer {
        return Err(Error::InvalidConfig(format!("{n} rows cannot fill {num_outer} folds")));
    }
    let classes = data.task().is_classification().then(|| data.class_labels());
    let assignments = assign_folds(classes.as_deref(), n, num_outer, derive_seed(seed, &[tag::OUTER_PLAN]));
    Ok(FoldPlan {
        num_outer_folds: num_outer,
        num_inner_folds: num_inner,
        assignments,
        seed,
        classes,
    })
}

impl FoldPlan {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        self.rows_where(|f| f == fold)
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        self.rows_where(|f| f != fold)
    }

    fn rows_where(&self, pred: impl Fn(usize) -> bool) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| pred(f))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_outer_folds];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    /// Inner (train, validation) splits of the outer training set of `fold`.
    pub fn inner_splits(&self, fold: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
        let outer_train = self.train_rows(fold);
        let sub_classes: Option<Vec<usize>> = self
            .classes
            .as_ref()
            .map(|c| outer_train.iter().map(|&r| c[r]).collect());
        let k = self.num_inner_folds.min(outer_train.len()).max(2);
        let inner = assign_folds(
            sub_classes.as_deref(),
            outer_train.len(),
            k,
            derive_seed(self.seed, &[tag::INNER_PLAN, fold as u64]),
        );
        (0..k)
            .map(|j| {
                let (mut train, mut val) = (Vec::new(), Vec::new());
                for (pos, &row) in outer_train.iter().enumerate() {
                    if inner[pos] == j {
                        val.push(row);
                    } else {
                        train.push(row);
                    }
                }
                train.sort_unstable();
                val.sort_unstable();
                (train, val)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Task;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn labelled(labels: Vec<f64>, classes: usize) -> Dataset {
        let n = labels.len();
        let x = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64);
        Dataset::from_nan_matrix("t", x, labels, Task::Classification { num_classes: classes }).unwrap()
    }

    #[test]
    fn exact_stratification() {
        let ds = labelled((0..10).map(|i| (i % 2) as f64).collect(), 2);
        let plan = make_fold_plan(&ds, 5, 5, 3).unwrap();
        for f in 0..5 {
            let rows = plan.test_rows(f);
            assert_eq!(rows.len(), 2);
            let ones = rows.iter().filter(|&&r| ds.labels()[r] == 1.0).count();
            assert_eq!(ones, 1);
        }
    }

    #[test]
    fn same_seed_same_plan() {
        let ds = labelled((0..50).map(|i| (i % 3) as f64).collect(), 3);
        assert_eq!(
            make_fold_plan(&ds, 5, 5, 11).unwrap().assignments,
            make_fold_plan(&ds, 5, 5, 11).unwrap().assignments
        );
        assert_ne!(
            make_fold_plan(&ds, 5, 5, 11).unwrap().assignments,
            make_fold_plan(&ds, 5, 5, 12).unwrap().assignments
        );
    }

    #[test]
    fn pima_sized_fold_sizes() {
        // 768 = 5 * 153 + 3, so three folds of 154 and two of 153.
        let labels: Vec<f64> = (0..768).map(|i| if i < 500 { 0.0 } else { 1.0 }).collect();
        let ds = labelled(labels, 2);
        let mut sizes = make_fold_plan(&ds, 5, 5, 0).unwrap().fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![153, 153, 154, 154, 154]);
    }

    #[test]
    fn rare_class_falls_back_to_unstratified() {
        let mut labels = vec![0.0; 20];
        labels[3] = 1.0;
        labels[9] = 1.0;
        let ds = labelled(labels, 2);
        let plan = make_fold_plan(&ds, 5, 5, 1).unwrap();
        assert_eq!(plan.assignments.len(), 20);
        let sizes = plan.fold_sizes();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn too_few_rows() {
        let ds = labelled(vec![0.0, 1.0, 0.0], 2);
        assert!(make_fold_plan(&ds, 5, 5, 1).is_err());
    }

    #[test]
    fn inner_splits_partition_outer_train() {
        let ds = labelled((0..40).map(|i| (i % 2) as f64).collect(), 2);
        let plan = make_fold_plan(&ds, 5, 4, 9).unwrap();
        let outer_train = plan.train_rows(2);
        let splits = plan.inner_splits(2);
        assert_eq!(splits.len(), 4);
        let mut all_val: Vec<usize> = splits.iter().flat_map(|(_, v)| v.clone()).collect();
        all_val.sort_unstable();
        assert_eq!(all_val, outer_train);
        for (train, val) in &splits {
            assert_eq!(train.len() + val.len(), outer_train.len());
            assert!(val.iter().all(|r| !train.contains(r)));
        }
    }

    proptest! {
        #[test]
        fn plans_partition_and_balance(
            labels in proptest::collection::vec(0usize..3, 10..120),
            k in 2usize..7,
            seed in any::<u64>(),
        ) {
            let n = labels.len();
            let folds = assign_folds(Some(&labels), n, k, seed);
            let mut sizes = vec![0usize; k];
            for &f in &folds { prop_assert!(f < k); sizes[f] += 1; }
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for c in 0..3 {
                let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
                if members.len() >= k {
                    let mut per = vec![0usize; k];
                    for &i in &members { per[folds[i]] += 1; }
                    prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
                }
            }
        }
    }
}
