//! Experiment protocols: nested cross-validation benchmarks, the
//! missingness-robustness holdout, and report tabulation.

mod cv;
mod model;
mod report;
mod robustness;

pub use cv::{double_cross_validate, run_outer_fold, CvSettings, ModelKind, OuterFoldResult, DEFAULT_GRID};
pub use model::{train_model, Metric, Model, Preprocessing, TrainedModel};
pub use report::{aggregate_report, mean_std, ConfigSnapshot, ExperimentReport, Table, TableRow};
pub use robustness::{robustness_experiment, robustness_partition, RobustnessOutcome, RobustnessSettings};
