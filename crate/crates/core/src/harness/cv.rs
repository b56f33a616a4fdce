use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{train_model, Metric, Model, TrainedModel};
use super::report::{ConfigSnapshot, ExperimentReport};
use crate::cluster::{cluster_features, DistanceMode, FeatureClustering};
use crate::data::{make_fold_plan, Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::nn::TrainConfig;
use crate::seed::{derive_seed, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Vanilla,
    Split,
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vanilla" => Ok(ModelKind::Vanilla),
            "split" => Ok(ModelKind::Split),
            other => Err(format!("unknown model {other:?} (vanilla|split)")),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Vanilla => "vanilla",
            ModelKind::Split => "split",
        })
    }
}

pub const DEFAULT_GRID: [f64; 3] = [0.3, 0.5, 0.7];

/// Nested cross-validation settings. The master seed is `train.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSettings {
    pub model: ModelKind,
    pub train: TrainConfig,
    pub num_outer_folds: usize,
    pub num_inner_folds: usize,
    pub grid: Vec<f64>,
    /// Skips the inner loop and clusters every outer fold at this fraction.
    pub fixed_threshold: Option<f64>,
    pub distance_mode: DistanceMode,
    /// Worker threads; 0 uses every core.
    #[serde(skip)]
    pub jobs: usize,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            model: ModelKind::Split,
            train: TrainConfig::default(),
            num_outer_folds: 5,
            num_inner_folds: 5,
            grid: DEFAULT_GRID.to_vec(),
            fixed_threshold: None,
            distance_mode: DistanceMode::Signed,
            jobs: 1,
        }
    }
}

impl CvSettings {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let check = |f: f64| {
            if f > 0.0 && f <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("threshold fraction {f} outside (0, 1]")))
            }
        };
        if let Some(f) = self.fixed_threshold {
            check(f)?;
        } else if self.model == ModelKind::Split {
            if self.grid.is_empty() {
                return Err(Error::InvalidConfig("threshold grid is empty".into()));
            }
            self.grid.iter().try_for_each(|&f| check(f))?;
        }
        if self.num_outer_folds < 2 || self.num_inner_folds < 2 {
            return Err(Error::InvalidConfig("fold counts must be at least 2".into()));
        }
        Ok(())
    }

    /// Fractions the inner loop chooses from; a single candidate means the
    /// inner loop is skipped.
    fn candidates(&self) -> Vec<f64> {
        match (self.model, self.fixed_threshold) {
            (ModelKind::Vanilla, _) => Vec::new(),
            (ModelKind::Split, Some(f)) => vec![f],
            (ModelKind::Split, None) => self.grid.clone(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> CvSettings {
        CvSettings {
            train: self.train.with_seed(seed),
            ..self.clone()
        }
    }
}

/// Everything one outer fold produced.
#[derive(Debug, Clone)]
pub struct OuterFoldResult {
    pub fold: usize,
    pub selected_fraction: Option<f64>,
    /// Mean inner-validation metric per grid fraction (empty when the inner
    /// loop was skipped).
    pub inner_scores: Vec<(f64, f64)>,
    pub clustering: FeatureClustering,
    pub model: Model,
    pub test_metric: f64,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {jobs} workers: {e}")))
}

/// Trains with `config`, retrying once with a seed derived from `retry_path`
/// if the first attempt diverges.
fn train_with_retry(
    data: &Dataset,
    train: &[usize],
    val: &[usize],
    clustering: Option<&FeatureClustering>,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    match train_model(data, train, val, clustering, config) {
        Err(e @ Error::Divergence { .. }) => {
            log::warn!("{}: {e}; retrying with a fresh seed (config {config:?})", data.name());
            train_model(
                data,
                train,
                val,
                clustering,
                &config.with_seed(derive_seed(config.seed, &[tag::RETRY])),
            )
        }
        other => other,
    }
}

fn clustering_for(data: &Dataset, rows: &[usize], settings: &CvSettings, fraction: Option<f64>) -> FeatureClustering {
    match fraction {
        Some(f) => cluster_features(data, rows, settings.distance_mode, f),
        None => FeatureClustering::single(data.n_features()),
    }
}

/// Picks the threshold fraction for one outer fold by mean inner-validation
/// metric; ties go to the smaller fraction.
fn select_fraction(
    data: &Dataset,
    plan: &FoldPlan,
    fold: usize,
    settings: &CvSettings,
    metric: Metric,
) -> Result<(f64, Vec<(f64, f64)>)> {
    let mut grid = settings.candidates();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    if grid.len() == 1 {
        return Ok((grid[0], Vec::new()));
    }
    let splits = plan.inner_splits(fold);
    let worst = match metric {
        Metric::Accuracy => 0.0,
        Metric::Rmse => f64::INFINITY,
    };
    // The training seed depends only on (fold, inner fold), so grid points
    // that cut to the same partition share one trained model.
    let per_split: Vec<Vec<f64>> = splits
        .par_iter()
        .enumerate()
        .map(|(j, (train, val))| -> Result<Vec<f64>> {
            let config = settings.train.with_seed(derive_seed(
                settings.train.seed,
                &[tag::INNER_TRAIN, fold as u64, j as u64],
            ));
            let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
            grid.iter()
                .map(|&f| {
                    let c = clustering_for(data, train, settings, Some(f));
                    if let Some(&s) = cache.get(c.assignment()) {
                        return Ok(s);
                    }
                    let score = match train_with_retry(data, train, val, Some(&c), &config) {
                        Ok(t) => t.final_val_metric.expect("validation rows present"),
                        Err(e @ Error::Divergence { .. }) => {
                            log::warn!("{}: inner fold {fold}/{j} at fraction {f} failed: {e}", data.name());
                            worst
                        }
                        Err(e) => return Err(e),
                    };
                    cache.insert(c.assignment().to_vec(), score);
                    Ok(score)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let scores: Vec<(f64, f64)> = grid
        .iter()
        .enumerate()
        .map(|(g, &f)| {
            let mean = per_split.iter().map(|s| s[g]).sum::<f64>() / per_split.len() as f64;
            (f, mean)
        })
        .collect();
    let mut best = scores[0];
    for &s in &scores[1..] {
        if metric.better(s.1, best.1) {
            best = s;
        }
    }
    Ok((best.0, scores))
}

/// Runs one outer fold: threshold selection on the outer training rows,
/// clustering and preprocessing refit on all of them, a final training run,
/// and scoring on the held-out fold. Held-out rows are never read before
/// the final scoring step.
pub fn run_outer_fold(data: &Dataset, plan: &FoldPlan, fold: usize, settings: &CvSettings) -> Result<OuterFoldResult> {
    let metric = Metric::for_task(data.task());
    let train = plan.train_rows(fold);
    let test = plan.test_rows(fold);
    let (selected, inner_scores) = match settings.model {
        ModelKind::Vanilla => (None, Vec::new()),
        ModelKind::Split => {
            let (f, s) = select_fraction(data, plan, fold, settings, metric)?;
            (Some(f), s)
        }
    };
    let clustering = clustering_for(data, &train, settings, selected);
    let config = settings
        .train
        .with_seed(derive_seed(settings.train.seed, &[tag::FINAL_TRAIN, fold as u64]));
    let trained = train_with_retry(data, &train, &[], Some(&clustering), &config)?;
    let test_metric = trained.model.evaluate(data, &test)?;
    Ok(OuterFoldResult {
        fold,
        selected_fraction: selected,
        inner_scores,
        clustering,
        model: trained.model,
        test_metric,
    })
}

/// Nested cross-validation of one model kind, summarized as a report.
/// Folds that diverge twice are listed in `failed_folds` and left out of the
/// aggregate.
pub fn double_cross_validate(data: &Dataset, settings: &CvSettings) -> Result<ExperimentReport> {
    settings.validate()?;
    let start = Instant::now();
    let plan = make_fold_plan(
        data,
        settings.num_outer_folds,
        settings.num_inner_folds,
        settings.train.seed,
    )?;
    let folds: Vec<Result<OuterFoldResult>> = pool(settings.jobs)?.install(|| {
        (0..settings.num_outer_folds)
            .into_par_iter()
            .map(|fold| run_outer_fold(data, &plan, fold, settings))
            .collect()
    });

    let mut per_fold = Vec::new();
    let mut failed = Vec::new();
    let mut fractions = Vec::new();
    let mut ks = Vec::new();
    for (fold, r) in folds.into_iter().enumerate() {
        match r {
            Ok(r) => {
                per_fold.push(r.test_metric);
                fractions.push(r.selected_fraction);
                ks.push(r.clustering.k());
            }
            Err(e @ Error::Divergence { .. }) => {
                log::error!("{}: outer fold {fold} failed after retry: {e}", data.name());
                failed.push(fold);
            }
            Err(e) => return Err(e),
        }
    }
    if per_fold.is_empty() {
        return Err(Error::Divergence {
            epoch: 0,
            batch: 0,
            what: "loss in every outer fold",
        });
    }
    let snapshot = ConfigSnapshot {
        train: settings.train.clone(),
        distance_mode: settings.distance_mode,
        num_outer_folds: settings.num_outer_folds,
        num_inner_folds: settings.num_inner_folds,
        grid: match settings.model {
            ModelKind::Split if settings.fixed_threshold.is_none() => settings.grid.clone(),
            _ => Vec::new(),
        },
        fixed_threshold: settings.fixed_threshold,
        inner_loop: settings.candidates().len() > 1,
        selected_fractions: fractions,
        k_per_fold: ks,
    };
    let mut report = ExperimentReport::new(
        data.name(),
        settings.model,
        settings.model.to_string(),
        Metric::for_task(data.task()),
        per_fold,
        snapshot,
    );
    report.failed_folds = failed;
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}
