use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::cv::ModelKind;
use super::model::Metric;
use crate::cluster::DistanceMode;
use crate::error::{Error, Result};
use crate::nn::TrainConfig;

/// Settings a report was produced under, including what each fold selected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub train: TrainConfig,
    pub distance_mode: DistanceMode,
    pub num_outer_folds: usize,
    pub num_inner_folds: usize,
    pub grid: Vec<f64>,
    pub fixed_threshold: Option<f64>,
    pub inner_loop: bool,
    pub selected_fractions: Vec<Option<f64>>,
    pub k_per_fold: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub model: ModelKind,
    /// Row label in rendered tables, e.g. `split (k=2)`.
    pub label: String,
    pub metric: Metric,
    pub per_fold_metric: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of `per_fold_metric`.
    pub std: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_metric: Option<f64>,
    #[serde(default)]
    pub failed_folds: Vec<usize>,
    pub config: ConfigSnapshot,
    /// Kept out of the serialized record so that reruns are byte-identical.
    #[serde(skip)]
    pub wall_time_seconds: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl ExperimentReport {
    pub fn new(
        dataset: &str,
        model: ModelKind,
        label: String,
        metric: Metric,
        per_fold_metric: Vec<f64>,
        config: ConfigSnapshot,
    ) -> ExperimentReport {
        let (mean, std) = mean_std(&per_fold_metric);
        ExperimentReport {
            dataset: dataset.to_string(),
            model,
            label,
            metric,
            per_fold_metric,
            mean,
            std,
            validation_metric: None,
            failed_folds: Vec::new(),
            config,
            wall_time_seconds: 0.0,
        }
    }

    /// Checks the stored aggregates against the fold metrics and the metric range.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        if self.per_fold_metric.is_empty() {
            return Err("no fold metrics".into());
        }
        let (mean, std) = mean_std(&self.per_fold_metric);
        if (mean - self.mean).abs() > 1e-12 || (std - self.std).abs() > 1e-12 {
            return Err(format!(
                "stored {} ± {} but folds give {mean} ± {std}",
                self.mean, self.std
            ));
        }
        let in_range = |m: &f64| match self.metric {
            Metric::Accuracy => (0.0..=1.0).contains(m),
            Metric::Rmse => *m >= 0.0,
        };
        if let Some(bad) = self.per_fold_metric.iter().find(|m| !in_range(m)) {
            return Err(format!("{} value {bad} out of range", self.metric));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    /// Parses one report per non-empty line.
    pub fn parse_jsonl(text: &str) -> Result<Vec<ExperimentReport>> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::MalformedData {
                    row: i + 1,
                    column: String::new(),
                    message: e.to_string(),
                })
            })
            .collect()
    }
}

/// One machine-readable row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub dataset: String,
    pub model: String,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    pub k_values: Vec<usize>,
    /// Best mean among this dataset's rows (only set with two or more rows).
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub rows: Vec<TableRow>,
    /// One line per dataset and one column per model; `*` marks the best.
    pub rendered: String,
}

/// Tabulates reports that share one metric.
pub fn aggregate_report(reports: &[ExperimentReport]) -> Result<Table> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidConfig("no reports to tabulate".into()))?;
    if let Some(other) = reports.iter().find(|r| r.metric != first.metric) {
        return Err(Error::MixedMetrics {
            first: first.metric.to_string(),
            second: other.metric.to_string(),
        });
    }
    let metric = first.metric;

    let mut datasets: Vec<&str> = Vec::new();
    let mut labels: Vec<&str> = Vec::new();
    for r in reports {
        if !datasets.contains(&r.dataset.as_str()) {
            datasets.push(&r.dataset);
        }
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }

    let mut rows: Vec<TableRow> = reports
        .iter()
        .map(|r| TableRow {
            dataset: r.dataset.clone(),
            model: r.label.clone(),
            metric,
            mean: r.mean,
            std: r.std,
            k_values: r.config.k_per_fold.clone(),
            best: false,
        })
        .collect();
    for ds in &datasets {
        let idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].dataset == *ds).collect();
        if idx.len() < 2 {
            continue;
        }
        let mut best = idx[0];
        for &i in &idx[1..] {
            if metric.better(rows[i].mean, rows[best].mean) {
                best = i;
            }
        }
        for &i in &idx {
            rows[i].best = rows[i].mean == rows[best].mean;
        }
    }

    let mut grid = vec![vec![String::new(); labels.len() + 1]; datasets.len() + 1];
    grid[0][0] = format!("dataset ({metric})");
    for (j, l) in labels.iter().enumerate() {
        grid[0][j + 1] = l.to_string();
    }
    for (i, ds) in datasets.iter().enumerate() {
        grid[i + 1][0] = ds.to_string();
    }
    for row in &rows {
        let i = datasets.iter().position(|d| *d == row.dataset).unwrap() + 1;
        let j = labels.iter().position(|l| *l == row.model).unwrap() + 1;
        grid[i][j] = format!("{:.3} ± {:.3}{}", row.mean, row.std, if row.best { "*" } else { "" });
    }
    let widths: Vec<usize> = (0..=labels.len())
        .map(|j| grid.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
        .collect();
    let mut rendered = String::new();
    for (i, line) in grid.iter().enumerate() {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        writeln!(rendered, "{}", cells.join("  ").trim_end()).unwrap();
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            writeln!(rendered, "{}", "-".repeat(total)).unwrap();
        }
    }
    Ok(Table { rows, rendered })
}
