use std::fs;
use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::cluster::FeatureClustering;
use crate::data::{fit_column_stats, impute, impute_and_normalize_rows, ColumnStats, Dataset, Task};
use crate::error::{Error, Result};
use crate::nn::{fit, NetworkOptions, SplitNetwork, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Rmse,
}

impl Metric {
    pub fn for_task(task: Task) -> Metric {
        match task {
            Task::Classification { .. } => Metric::Accuracy,
            Task::Regression => Metric::Rmse,
        }
    }

    /// True when `a` is a strictly better score than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Metric::Accuracy => a > b,
            Metric::Rmse => a < b,
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Accuracy => "accuracy",
            Metric::Rmse => "rmse",
        })
    }
}

/// Training-split transforms carried with a model so that held-out rows are
/// imputed and scaled exactly as the training rows were.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub stats: ColumnStats,
    pub normalize: bool,
    /// `(mean, std)` of regression targets when they were standardized.
    pub target_scaling: Option<(f64, f64)>,
}

impl Preprocessing {
    pub fn fit(data: &Dataset, rows: &[usize], config: &TrainConfig) -> Preprocessing {
        let stats = fit_column_stats(data, rows);
        let target_scaling = (data.task() == Task::Regression && config.standardize_target).then(|| {
            let ys: Vec<f64> = rows.iter().map(|&r| data.labels()[r]).collect();
            let mean = ys.iter().sum::<f64>() / ys.len() as f64;
            let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / ys.len() as f64;
            (mean, if var > 0.0 { var.sqrt() } else { 1.0 })
        });
        Preprocessing {
            stats,
            normalize: config.normalize,
            target_scaling,
        }
    }

    pub fn features(&self, data: &Dataset, rows: &[usize]) -> Result<Array2<f64>> {
        if self.normalize {
            impute_and_normalize_rows(data, &self.stats, rows)
        } else {
            impute(data, &self.stats, rows)
        }
    }

    pub fn targets(&self, data: &Dataset, rows: &[usize]) -> Vec<f64> {
        rows.iter()
            .map(|&r| {
                let y = data.labels()[r];
                match self.target_scaling {
                    Some((m, s)) => (y - m) / s,
                    None => y,
                }
            })
            .collect()
    }
}

/// A trained network with the preprocessing it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub network: SplitNetwork,
    pub preprocessing: Preprocessing,
}

const CHECKPOINT_FORMAT: &str = "splitnn-model";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    model: Model,
}

impl Model {
    /// Fused predictions for `rows`: class probabilities, or regression
    /// values in the original target units.
    pub fn predict(&self, data: &Dataset, rows: &[usize]) -> Result<Array2<f64>> {
        let x = self.preprocessing.features(data, rows)?;
        let mut out = self.network.predict(x.view())?;
        if let Some((m, s)) = self.preprocessing.target_scaling {
            out.mapv_inplace(|v| v * s + m);
        }
        Ok(out)
    }

    /// Accuracy (argmax of fused probabilities, lowest index on ties) or RMSE.
    pub fn evaluate(&self, data: &Dataset, rows: &[usize]) -> Result<f64> {
        let pred = self.predict(data, rows)?;
        Ok(score(self.network.task(), &pred, data, rows))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            model: self.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Model> {
        let cp: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if cp.format != CHECKPOINT_FORMAT || cp.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                cp.format, cp.version
            )));
        }
        // Re-validate layer shapes against the clustering.
        let net = cp.model.network;
        let shared = (net.head_mode() == crate::nn::HeadMode::Shared)
            .then(|| net.layers().last().map(|l| (*l).clone()))
            .flatten();
        let network = SplitNetwork::from_parts(net.clustering().clone(), net.branches().to_vec(), shared, net.task())?;
        Ok(Model {
            network,
            preprocessing: cp.model.preprocessing,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Model> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&text)
    }
}

pub(crate) fn score(task: Task, pred: &Array2<f64>, data: &Dataset, rows: &[usize]) -> f64 {
    match task {
        Task::Classification { .. } => {
            let correct = pred
                .axis_iter(Axis(0))
                .zip(rows)
                .filter(|(p, &r)| {
                    let mut best = 0;
                    for (c, &v) in p.iter().enumerate() {
                        if v > p[best] {
                            best = c;
                        }
                    }
                    best as f64 == data.labels()[r]
                })
                .count();
            correct as f64 / rows.len() as f64
        }
        Task::Regression => {
            let sse: f64 = pred
                .column(0)
                .iter()
                .zip(rows)
                .map(|(p, &r)| (p - data.labels()[r]).powi(2))
                .sum();
            (sse / rows.len() as f64).sqrt()
        }
    }
}

/// Result of [`train_model`].
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: Model,
    /// Mean minibatch loss per epoch.
    pub train_loss: Vec<f64>,
    /// Validation metric after every epoch (empty without validation rows).
    pub val_metric: Vec<f64>,
    pub train_metric: f64,
    pub final_val_metric: Option<f64>,
}

/// Fits preprocessing on `train_rows`, builds the network (a single branch
/// when `clustering` is `None`) and trains it for `config.epochs` epochs.
/// The final-epoch model is returned.
pub fn train_model(
    data: &Dataset,
    train_rows: &[usize],
    val_rows: &[usize],
    clustering: Option<&FeatureClustering>,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    if train_rows.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    let train_set: std::collections::HashSet<usize> = train_rows.iter().copied().collect();
    if val_rows.iter().any(|r| train_set.contains(r)) {
        return Err(Error::InvalidConfig("training and validation rows overlap".into()));
    }
    let vanilla = FeatureClustering::single(data.n_features());
    let clustering = clustering.unwrap_or(&vanilla);
    if clustering.n_features() != data.n_features() {
        return Err(Error::shape(
            format!("clustering over {} features", data.n_features()),
            clustering.n_features(),
        ));
    }
    let preprocessing = Preprocessing::fit(data, train_rows, config);
    let x = preprocessing.features(data, train_rows)?;
    let y = preprocessing.targets(data, train_rows);
    let x_val = preprocessing.features(data, val_rows)?;

    let mut network = SplitNetwork::build(
        clustering,
        data.task(),
        config.total_hidden,
        config.init_seed(),
        NetworkOptions {
            head_mode: config.head_mode,
            ..NetworkOptions::default()
        },
    )?;

    let task = data.task();
    let scaling = preprocessing.target_scaling;
    let val_score = |net: &SplitNetwork| -> f64 {
        let mut pred = net.predict(x_val.view()).expect("validated shapes");
        if let Some((m, s)) = scaling {
            pred.mapv_inplace(|v| v * s + m);
        }
        score(task, &pred, data, val_rows)
    };
    let mut train_loss = Vec::with_capacity(config.epochs);
    let mut val_metric = Vec::new();
    fit(&mut network, &x, &y, config, |_, net, loss| {
        train_loss.push(loss);
        if !val_rows.is_empty() {
            val_metric.push(val_score(net));
        }
    })?;

    let model = Model { network, preprocessing };
    let train_metric = model.evaluate(data, train_rows)?;
    let final_val_metric = (!val_rows.is_empty()).then(|| val_score(&model.network));
    Ok(TrainedModel {
        model,
        train_loss,
        val_metric,
        train_metric,
        final_val_metric,
    })
}
