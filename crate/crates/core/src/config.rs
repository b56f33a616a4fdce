//! Flat `key = value` run configuration. Every key has a default, so an
//! empty file plus a schema path is a complete configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::DistanceMode;
use crate::error::{Error, Result};
use crate::harness::{CvSettings, ModelKind, RobustnessSettings, DEFAULT_GRID};
use crate::nn::{HeadMode, TrainConfig};

/// Which models a benchmark trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    #[default]
    Both,
    Vanilla,
    Split,
}

impl ModelChoice {
    pub fn kinds(self) -> Vec<ModelKind> {
        match self {
            ModelChoice::Both => vec![ModelKind::Vanilla, ModelKind::Split],
            ModelChoice::Vanilla => vec![ModelKind::Vanilla],
            ModelChoice::Split => vec![ModelKind::Split],
        }
    }
}

impl std::str::FromStr for ModelChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "both" => Ok(ModelChoice::Both),
            "vanilla" => Ok(ModelChoice::Vanilla),
            "split" => Ok(ModelChoice::Split),
            other => Err(format!("unknown model {other:?} (both|vanilla|split)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset schemas; the benchmark runs all of them, other commands the first.
    pub schemas: Vec<PathBuf>,
    /// Optional data files overriding each schema's `data_file`, in the same order.
    pub datasets: Vec<PathBuf>,
    pub model: ModelChoice,
    pub distance_mode: DistanceMode,
    /// Cut fraction for `cluster` and the split model in `robustness`.
    pub threshold: f64,
    pub grid: Vec<f64>,
    pub fixed_threshold: Option<f64>,
    /// Cluster count of the extra split model in `robustness`; 0 disables it.
    pub forced_k: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub total_hidden: usize,
    pub head_mode: HeadMode,
    pub normalize: bool,
    pub standardize_target: bool,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub train_fraction: f64,
    pub seed: u64,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    pub jobs: usize,
    pub out: PathBuf,
    pub gradcheck_networks: usize,
    pub gradcheck_epsilon: f64,
    pub gradcheck_tolerance: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        RunConfig {
            schemas: Vec::new(),
            datasets: Vec::new(),
            model: ModelChoice::Both,
            distance_mode: DistanceMode::Signed,
            threshold: 0.5,
            grid: DEFAULT_GRID.to_vec(),
            fixed_threshold: None,
            forced_k: 2,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            epochs: train.epochs,
            total_hidden: train.total_hidden,
            head_mode: train.head_mode,
            normalize: train.normalize,
            standardize_target: train.standardize_target,
            outer_folds: 5,
            inner_folds: 5,
            train_fraction: 0.8,
            seed: 0,
            jobs: 1,
            out: PathBuf::from("runs"),
            gradcheck_networks: 50,
            gradcheck_epsilon: 1e-5,
            gradcheck_tolerance: 1e-4,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Writes the resolved configuration as `config.toml` in the output directory.
    pub fn write_resolved(&self) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        let path = self.out.join("config.toml");
        fs::write(&path, self.to_toml()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            total_hidden: self.total_hidden,
            head_mode: self.head_mode,
            normalize: self.normalize,
            standardize_target: self.standardize_target,
        }
    }

    pub fn cv_settings(&self, model: ModelKind) -> CvSettings {
        CvSettings {
            model,
            train: self.train_config(),
            num_outer_folds: self.outer_folds,
            num_inner_folds: self.inner_folds,
            grid: self.grid.clone(),
            fixed_threshold: self.fixed_threshold,
            distance_mode: self.distance_mode,
            jobs: self.jobs,
        }
    }

    pub fn robustness_settings(&self) -> RobustnessSettings {
        RobustnessSettings {
            train: self.train_config(),
            threshold_fraction: self.threshold,
            distance_mode: self.distance_mode,
            forced_k: (self.forced_k > 0).then_some(self.forced_k),
            train_fraction: self.train_fraction,
        }
    }

    /// `(schema, data override)` pairs.
    pub fn dataset_specs(&self) -> Result<Vec<(PathBuf, Option<PathBuf>)>> {
        if self.schemas.is_empty() {
            return Err(Error::InvalidConfig("no dataset schema given (--schema)".into()));
        }
        if !self.datasets.is_empty() && self.datasets.len() != self.schemas.len() {
            return Err(Error::InvalidConfig(format!(
                "{} data files for {} schemas",
                self.datasets.len(),
                self.schemas.len()
            )));
        }
        Ok(self
            .schemas
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), self.datasets.get(i).cloned()))
            .collect())
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        let fraction_ok = |f: f64| f > 0.0 && f <= 1.0;
        if !fraction_ok(self.threshold) {
            return Err(Error::InvalidConfig(format!(
                "threshold {} outside (0, 1]",
                self.threshold
            )));
        }
        if let Some(f) = self.fixed_threshold {
            if !fraction_ok(f) {
                return Err(Error::InvalidConfig(format!("fixed_threshold {f} outside (0, 1]")));
            }
        }
        if self.grid.is_empty() || !self.grid.iter().all(|&f| fraction_ok(f)) {
            return Err(Error::InvalidConfig(format!(
                "grid {:?} must be non-empty fractions in (0, 1]",
                self.grid
            )));
        }
        if self.outer_folds < 2 || self.inner_folds < 2 {
            return Err(Error::InvalidConfig("fold counts must be at least 2".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig("train_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}
