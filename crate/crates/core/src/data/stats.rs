use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Per-feature statistics over the observed cells of one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    /// Population standard deviation; 1 when fewer than two cells were observed.
    pub std: Vec<f64>,
    pub observed_count: Vec<usize>,
}

impl ColumnStats {
    pub fn n_features(&self) -> usize {
        self.mean.len()
    }
}

/// Fits mean and population std over the observed cells of `rows` only.
///
/// A zero std (constant column) is replaced by 1 so normalization stays finite.
pub fn fit_column_stats(data: &Dataset, rows: &[usize]) -> ColumnStats {
    assert!(!rows.is_empty(), "cannot fit column stats on an empty row set");
    let d = data.n_features();
    let mut mean = vec![0.0; d];
    let mut std = vec![1.0; d];
    let mut observed_count = vec![0; d];
    for j in 0..d {
        let values: Vec<f64> = rows.iter().filter_map(|&r| data.value(r, j)).collect();
        observed_count[j] = values.len();
        if values.is_empty() {
            continue;
        }
        let m = values.iter().sum::<f64>() / values.len() as f64;
        mean[j] = m;
        if values.len() > 1 {
            let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
            let s = var.sqrt();
            std[j] = if s > 0.0 { s } else { 1.0 };
        }
    }
    ColumnStats {
        mean,
        std,
        observed_count,
    }
}

fn check_dims(data: &Dataset, stats: &ColumnStats) -> Result<()> {
    if stats.n_features() != data.n_features() {
        return Err(Error::shape(
            format!("{} features", stats.n_features()),
            format!("{} features", data.n_features()),
        ));
    }
    Ok(())
}

/// Z-scores observed cells with the fitted stats; missing cells become 0,
/// which is the normalized image of the column mean.
pub fn impute_and_normalize(data: &Dataset, stats: &ColumnStats) -> Result<Array2<f64>> {
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    impute_and_normalize_rows(data, stats, &rows)
}

/// Like [`impute_and_normalize`] but only for the given rows, in order.
pub fn impute_and_normalize_rows(data: &Dataset, stats: &ColumnStats, rows: &[usize]) -> Result<Array2<f64>> {
    check_dims(data, stats)?;
    let d = data.n_features();
    Ok(Array2::from_shape_fn((rows.len(), d), |(i, j)| {
        match data.value(rows[i], j) {
            Some(v) => (v - stats.mean[j]) / stats.std[j],
            None => 0.0,
        }
    }))
}

/// Mean imputation without rescaling.
pub fn impute(data: &Dataset, stats: &ColumnStats, rows: &[usize]) -> Result<Array2<f64>> {
    check_dims(data, stats)?;
    let d = data.n_features();
    Ok(Array2::from_shape_fn((rows.len(), d), |(i, j)| {
        data.value(rows[i], j).unwrap_or(stats.mean[j])
    }))
}

/// Inverse of the z-score applied by [`impute_and_normalize`].
pub fn denormalize(normalized: &Array2<f64>, stats: &ColumnStats) -> Array2<f64> {
    let mut out = normalized.clone();
    for ((_, j), v) in out.indexed_iter_mut() {
        *v = *v * stats.std[j] + stats.mean[j];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Task;
    use ndarray::array;
    use proptest::prelude::*;

    fn ds(features: Array2<f64>) -> Dataset {
        let n = features.nrows();
        Dataset::from_nan_matrix("t", features, vec![0.0; n], Task::Regression).unwrap()
    }

    #[test]
    fn mean_skips_missing() {
        let d = ds(array![[2.0, 0.0], [f64::NAN, 0.0], [4.0, 0.0]]);
        let s = fit_column_stats(&d, &[0, 1, 2]);
        assert_eq!(s.mean[0], 3.0);
        assert_eq!(s.observed_count[0], 2);
        assert_eq!(s.std[0], 1.0);
    }

    #[test]
    fn fully_missing_column_falls_back() {
        let d = ds(array![[f64::NAN, 1.0], [f64::NAN, 2.0]]);
        let s = fit_column_stats(&d, &[0, 1]);
        assert_eq!((s.mean[0], s.std[0], s.observed_count[0]), (0.0, 1.0, 0));
    }

    #[test]
    fn single_observation_has_unit_std() {
        let d = ds(array![[7.0, 1.0], [f64::NAN, 2.0]]);
        let s = fit_column_stats(&d, &[0, 1]);
        assert_eq!((s.mean[0], s.std[0], s.observed_count[0]), (7.0, 1.0, 1));
    }

    #[test]
    fn stats_use_only_given_rows() {
        let d = ds(array![[1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [4.0, 0.0]]);
        let s = fit_column_stats(&d, &[0, 1]);
        assert_eq!(s.mean[0], 1.5);
    }

    #[test]
    fn normalization_examples() {
        let d = ds(array![[3.0, 5.0], [f64::NAN, 1.0]]);
        let stats = ColumnStats {
            mean: vec![3.0, 3.0],
            std: vec![1.0, 2.0],
            observed_count: vec![1, 2],
        };
        let z = impute_and_normalize(&d, &stats).unwrap();
        assert_eq!(z[[0, 0]], 0.0);
        assert_eq!(z[[1, 0]], 0.0);
        assert_eq!(z[[0, 1]], 1.0);
        assert!(z.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let d = ds(array![[3.0, 5.0]]);
        let stats = ColumnStats {
            mean: vec![0.0; 3],
            std: vec![1.0; 3],
            observed_count: vec![1; 3],
        };
        assert!(matches!(impute_and_normalize(&d, &stats), Err(Error::Shape { .. })));
    }

    #[test]
    fn poisoned_heldout_rows_do_not_move_stats() {
        let d = ds(array![[1.0, 2.0], [3.0, 5.0], [f64::NAN, 7.0], [10.0, 11.0]]);
        let train = [0, 1, 2];
        let clean = fit_column_stats(&d, &train);
        let poisoned = fit_column_stats(&d.with_scaled_rows(&[3], 1e6), &train);
        assert_eq!(clean, poisoned);
    }

    proptest! {
        #[test]
        fn normalize_round_trips(values in proptest::collection::vec(-1e3f64..1e3, 6..40)) {
            let n = values.len() / 2;
            let m = Array2::from_shape_vec((n, 2), values[..2 * n].to_vec()).unwrap();
            let d = ds(m.clone());
            let rows: Vec<usize> = (0..n).collect();
            let stats = fit_column_stats(&d, &rows);
            let back = denormalize(&impute_and_normalize(&d, &stats).unwrap(), &stats);
            for (a, b) in back.iter().zip(m.iter()) {
                prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }
}
