//! Tabular datasets with an explicit missingness mask.
//!
//! Missing cells hold `NaN` in the feature matrix, but nothing downstream
//! reads a cell without consulting [`Dataset::mask`] first.

mod folds;
mod schema;
mod stats;

pub use folds::{assign_folds, make_fold_plan, FoldPlan};
pub use schema::{load_dataset, load_with_schema, ColumnRole, ColumnSpec, Schema, DEFAULT_MISSING_MARKERS};
pub use stats::{denormalize, fit_column_stats, impute, impute_and_normalize, impute_and_normalize_rows, ColumnStats};

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the label column means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Task {
    Classification { num_classes: usize },
    Regression,
}

impl Task {
    /// Width of the network output for this task.
    pub fn output_dim(self) -> usize {
        match self {
            Task::Classification { num_classes } => num_classes,
            Task::Regression => 1,
        }
    }

    pub fn is_classification(self) -> bool {
        matches!(self, Task::Classification { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: Array2<f64>,
    mask: Array2<bool>,
    labels: Vec<f64>,
    feature_names: Vec<String>,
    task: Task,
    rejected_rows: usize,
}

impl Dataset {
    /// Builds a dataset, checking every structural invariant. Cells whose
    /// mask entry is false are overwritten with `NaN`.
    pub fn new(
        name: impl Into<String>,
        mut features: Array2<f64>,
        mask: Array2<bool>,
        labels: Vec<f64>,
        feature_names: Vec<String>,
        task: Task,
    ) -> Result<Self> {
        let name = name.into();
        let (n, d) = features.dim();
        if mask.dim() != (n, d) {
            return Err(Error::shape(
                format!("mask {n}x{d}"),
                format!("{}x{}", mask.nrows(), mask.ncols()),
            ));
        }
        if labels.len() != n {
            return Err(Error::shape(format!("{n} labels"), labels.len()));
        }
        if feature_names.len() != d {
            return Err(Error::shape(format!("{d} feature names"), feature_names.len()));
        }
        if n == 0 {
            return Err(Error::EmptyDataset { name });
        }
        if d < 2 {
            return Err(Error::InvalidDataset(format!(
                "{name}: need at least 2 features, found {d}"
            )));
        }
        match task {
            Task::Classification { num_classes } => {
                if num_classes < 2 {
                    return Err(Error::InvalidDataset(format!(
                        "{name}: classification needs at least 2 classes"
                    )));
                }
                if let Some((row, y)) = labels
                    .iter()
                    .enumerate()
                    .find(|(_, &y)| y.fract() != 0.0 || y < 0.0 || y >= num_classes as f64)
                {
                    return Err(Error::InvalidDataset(format!(
                        "{name}: label {y} at row {row} is not a class index below {num_classes}"
                    )));
                }
            }
            Task::Regression => {
                if let Some(row) = labels.iter().position(|y| !y.is_finite()) {
                    return Err(Error::InvalidDataset(format!(
                        "{name}: non-finite regression label at row {row}"
                    )));
                }
            }
        }
        for ((value, &observed), idx) in features.iter_mut().zip(mask.iter()).zip(0..) {
            if !observed {
                *value = f64::NAN;
            } else if !value.is_finite() {
                return Err(Error::MalformedData {
                    row: idx / d,
                    column: feature_names[idx % d].clone(),
                    message: "observed cell is not finite".into(),
                });
            }
        }
        Ok(Dataset {
            name,
            features,
            mask,
            labels,
            feature_names,
            task,
            rejected_rows: 0,
        })
    }

    /// Builds a dataset from a matrix in which `NaN` marks a missing cell.
    pub fn from_nan_matrix(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<f64>,
        task: Task,
    ) -> Result<Self> {
        let mask = features.mapv(|v| !v.is_nan());
        let names = (0..features.ncols()).map(|j| format!("x{j}")).collect();
        Dataset::new(name, features, mask, labels, names, task)
    }

    /// Like [`Dataset::from_nan_matrix`] for a flat row-major buffer.
    pub fn from_row_major(
        name: impl Into<String>,
        n_rows: usize,
        n_features: usize,
        values: Vec<f64>,
        labels: Vec<f64>,
        task: Task,
    ) -> Result<Self> {
        let found = values.len();
        let features = Array2::from_shape_vec((n_rows, n_features), values)
            .map_err(|_| Error::shape(format!("{n_rows}x{n_features} values"), found))?;
        Dataset::from_nan_matrix(name, features, labels, task)
    }

    pub(crate) fn with_rejected_rows(mut self, rejected: usize) -> Self {
        self.rejected_rows = rejected;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    /// Raw feature matrix; missing cells are `NaN`.
    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    /// Rows dropped at load time because their label was missing.
    pub fn rejected_rows(&self) -> usize {
        self.rejected_rows
    }

    /// The value of a cell, or `None` when it is missing.
    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        self.mask[[row, col]].then(|| self.features[[row, col]])
    }

    pub fn column(&self, col: usize) -> ArrayView1<'_, f64> {
        self.features.index_axis(Axis(1), col)
    }

    pub fn missing_fraction(&self) -> f64 {
        let missing = self.mask.iter().filter(|&&m| !m).count();
        missing as f64 / self.mask.len() as f64
    }

    pub fn row_has_missing(&self, row: usize) -> bool {
        self.mask.row(row).iter().any(|&m| !m)
    }

    /// Indices of rows with at least one missing feature.
    pub fn rows_with_missing(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&r| self.row_has_missing(r)).collect()
    }

    /// Copy of the dataset in which every observed value of the given rows
    /// is multiplied by `factor`. Used to poison held-out rows in leakage
    /// tests.
    pub fn with_scaled_rows(&self, rows: &[usize], factor: f64) -> Dataset {
        let mut out = self.clone();
        for &r in rows {
            for c in 0..out.n_features() {
                if out.mask[[r, c]] {
                    out.features[[r, c]] *= factor;
                }
            }
        }
        out
    }

    /// Class index of every row. Panics for regression datasets.
    pub fn class_labels(&self) -> Vec<usize> {
        assert!(self.task.is_classification(), "regression dataset has no classes");
        self.labels.iter().map(|&y| y as usize).collect()
    }
}
