use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::cv::ModelKind;
use super::model::{train_model, Metric};
use super::report::{ConfigSnapshot, ExperimentReport};
use crate::cluster::{
    complete_linkage, correlation_distance, cut_dendrogram, fraction_for_k, DistanceMode, FeatureClustering,
};
use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::nn::TrainConfig;
use crate::seed::{derive_seed, rng, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSettings {
    /// Master seed is `train.seed`.
    pub train: TrainConfig,
    pub threshold_fraction: f64,
    pub distance_mode: DistanceMode,
    /// Also train a split model cut to exactly this many clusters.
    pub forced_k: Option<usize>,
    pub train_fraction: f64,
}

impl Default for RobustnessSettings {
    fn default() -> Self {
        RobustnessSettings {
            train: TrainConfig::default(),
            threshold_fraction: 0.5,
            distance_mode: DistanceMode::Signed,
            forced_k: Some(2),
            train_fraction: 0.8,
        }
    }
}

/// Row partition and the vanilla, split and forced-k reports. Each report
/// holds the test RMSE as its single fold metric and the validation RMSE
/// in `validation_metric`.
#[derive(Debug, Clone)]
pub struct RobustnessOutcome {
    pub train_rows: Vec<usize>,
    pub val_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub reports: Vec<ExperimentReport>,
}

impl RobustnessOutcome {
    pub fn test_fraction(&self) -> f64 {
        let n = self.train_rows.len() + self.val_rows.len() + self.test_rows.len();
        self.test_rows.len() as f64 / n as f64
    }
}

/// Test rows are exactly the rows with a missing feature; the complete rows
/// are shuffled and split into train and validation.
pub fn robustness_partition(
    data: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let test = data.rows_with_missing();
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut complete: Vec<usize> = (0..data.n_rows()).filter(|&r| !data.row_has_missing(r)).collect();
    if complete.len() < 2 {
        return Err(Error::InvalidDataset(format!(
            "{} complete rows; need at least 2 for a train/validation split",
            complete.len()
        )));
    }
    complete.shuffle(&mut rng(derive_seed(seed, &[tag::HOLDOUT])));
    let n_train = ((train_fraction * complete.len() as f64).round() as usize).clamp(1, complete.len() - 1);
    let mut val = complete.split_off(n_train);
    let mut train = complete;
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val, test))
}

pub fn robustness_experiment(data: &Dataset, settings: &RobustnessSettings) -> Result<RobustnessOutcome> {
    if data.task() != Task::Regression {
        return Err(Error::InvalidDataset(format!(
            "{} is not a regression dataset",
            data.name()
        )));
    }
    settings.train.validate()?;
    if !(settings.threshold_fraction > 0.0 && settings.threshold_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "threshold fraction {} outside (0, 1]",
            settings.threshold_fraction
        )));
    }
    if !(settings.train_fraction > 0.0 && settings.train_fraction < 1.0) {
        return Err(Error::InvalidConfig("train fraction must lie in (0, 1)".into()));
    }
    let (train, val, test) = robustness_partition(data, settings.train_fraction, settings.train.seed)?;
    let tree = complete_linkage(&correlation_distance(data, &train, settings.distance_mode));

    let mut runs: Vec<(ModelKind, String, Option<FeatureClustering>)> = vec![
        (ModelKind::Vanilla, "vanilla".into(), None),
        (
            ModelKind::Split,
            "split".into(),
            Some(cut_dendrogram(&tree, settings.threshold_fraction)),
        ),
    ];
    if let Some(k) = settings.forced_k {
        match fraction_for_k(&tree, k) {
            Some(f) => runs.push((
                ModelKind::Split,
                format!("split (k={k})"),
                Some(cut_dendrogram(&tree, f)),
            )),
            None => log::warn!("{}: no threshold cuts the dendrogram into {k} clusters", data.name()),
        }
    }

    let config = settings
        .train
        .with_seed(derive_seed(settings.train.seed, &[tag::FINAL_TRAIN]));
    let mut reports = Vec::with_capacity(runs.len());
    for (model, label, clustering) in runs {
        let start = Instant::now();
        let trained = train_model(data, &train, &val, clustering.as_ref(), &config)?;
        let test_rmse = trained.model.evaluate(data, &test)?;
        let c = trained.model.network.clustering();
        let snapshot = ConfigSnapshot {
            train: settings.train.clone(),
            distance_mode: settings.distance_mode,
            num_outer_folds: 1,
            num_inner_folds: 0,
            grid: Vec::new(),
            fixed_threshold: clustering.as_ref().map(|c| c.threshold_fraction()),
            inner_loop: false,
            selected_fractions: vec![clustering.as_ref().map(|c| c.threshold_fraction())],
            k_per_fold: vec![c.k()],
        };
        let mut report = ExperimentReport::new(data.name(), model, label, Metric::Rmse, vec![test_rmse], snapshot);
        report.validation_metric = trained.final_val_metric;
        report.wall_time_seconds = start.elapsed().as_secs_f64();
        reports.push(report);
    }
    Ok(RobustnessOutcome {
        train_rows: train,
        val_rows: val,
        test_rows: test,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};

    fn regression(n: usize, missing: f64, seed: u64) -> Dataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, 4));
        let mut y = Vec::new();
        for i in 0..n {
            for j in 0..4 {
                x[[i, j]] = rng.gen_range(-1.0..1.0);
            }
            y.push(x[[i, 0]] + x[[i, 2]]);
            if rng.gen_bool(missing) {
                x[[i, rng.gen_range(0..4)]] = f64::NAN;
            }
        }
        Dataset::from_nan_matrix("reg", x, y, Task::Regression).unwrap()
    }

    #[test]
    fn partition_covers_rows_disjointly() {
        let data = regression(101, 0.3, 1);
        let (train, val, test) = robustness_partition(&data, 0.8, 9).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&val).chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
        assert!(test.iter().all(|&r| data.row_has_missing(r)));
        assert!(train.iter().chain(&val).all(|&r| !data.row_has_missing(r)));
        let complete = train.len() + val.len();
        assert_eq!(train.len(), (0.8 * complete as f64).round() as usize);
    }

    #[test]
    fn fully_observed_data_has_no_test_set() {
        let data = regression(20, 0.0, 2);
        let err = robustness_experiment(&data, &RobustnessSettings::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyTestSet));
    }

    #[test]
    fn classification_is_rejected() {
        let x = Array2::from_elem((4, 2), 1.0);
        let data = Dataset::from_nan_matrix(
            "c",
            x,
            vec![0.0, 1.0, 0.0, 1.0],
            Task::Classification { num_classes: 2 },
        )
        .unwrap();
        assert!(matches!(
            robustness_experiment(&data, &RobustnessSettings::default()),
            Err(Error::InvalidDataset(_))
        ));
    }

    #[test]
    fn produces_three_rows() {
        let data = regression(80, 0.3, 3);
        let settings = RobustnessSettings {
            train: TrainConfig {
                epochs: 5,
                batch_size: 16,
                total_hidden: 8,
                ..TrainConfig::default()
            },
            ..RobustnessSettings::default()
        };
        let out = robustness_experiment(&data, &settings).unwrap();
        let labels: Vec<&str> = out.reports.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["vanilla", "split", "split (k=2)"]);
        assert_eq!(out.reports[2].config.k_per_fold, vec![2]);
        for r in &out.reports {
            assert!(r.validation_metric.unwrap() >= 0.0);
            r.check_consistency().unwrap();
        }
    }
}
