//! Delimited-text ingestion driven by a TOML schema.
//!
//! A schema lists every column of the file, in file order, with its role:
//!
//! ```toml
//! name = "pima"
//! data_file = "pima.dat"        # optional, relative to the schema file
//! delimiter = ","               # default ","
//! has_header = false            # default false
//! comment_prefix = "@"          # optional; lines starting with it are skipped
//! missing_markers = ["?", "NA", ""]
//! task = "classification"       # or "regression"
//!
//! [[columns]]
//! name = "glucose"
//! role = "numeric"              # numeric | binary | label | ignore
//! missing_markers = ["0"]       # extra per-column markers
//!
//! [[columns]]
//! name = "class"
//! role = "label"
//! classes = ["tested_negative", "tested_positive"]   # optional ordering
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Dataset, Task};
use crate::error::{Error, Result};

pub const DEFAULT_MISSING_MARKERS: [&str; 3] = ["?", "NA", ""];

fn default_delimiter() -> String {
    ",".into()
}

fn default_markers() -> Vec<String> {
    DEFAULT_MISSING_MARKERS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Numeric,
    /// Two-valued categorical column encoded as 0/1.
    Binary,
    Label,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub role: ColumnRole,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_markers: Vec<String>,
    /// Binary columns: the token mapped to 0 followed by the token mapped to 1.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
    /// Classification labels: class tokens in class-index order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_file: Option<PathBuf>,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default)]
    pub has_header: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment_prefix: Option<String>,
    #[serde(default = "default_markers")]
    pub missing_markers: Vec<String>,
    pub task: TaskKind,
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn from_file(path: &Path) -> Result<Schema> {
        if !path.exists() {
            return Err(Error::SchemaNotFound {
                path: path.to_path_buf(),
            });
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut schema: Schema = toml::from_str(&text).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if let (Some(file), Some(dir)) = (&schema.data_file, path.parent()) {
            if file.is_relative() {
                schema.data_file = Some(dir.join(file));
            }
        }
        schema.validate().map_err(|message| Error::Schema {
            path: path.to_path_buf(),
            message,
        })?;
        Ok(schema)
    }

    pub fn from_toml(text: &str) -> Result<Schema> {
        let schema: Schema = toml::from_str(text).map_err(|e| Error::Schema {
            path: PathBuf::from("<inline>"),
            message: e.to_string(),
        })?;
        schema.validate().map_err(|message| Error::Schema {
            path: PathBuf::from("<inline>"),
            message,
        })?;
        Ok(schema)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let labels = self.columns.iter().filter(|c| c.role == ColumnRole::Label).count();
        if labels != 1 {
            return Err(format!("expected exactly one label column, found {labels}"));
        }
        if self.delimiter.len() != 1 {
            return Err(format!("delimiter must be a single byte, got {:?}", self.delimiter));
        }
        if let Some(prefix) = &self.comment_prefix {
            if prefix.len() != 1 {
                return Err(format!("comment_prefix must be a single byte, got {prefix:?}"));
            }
        }
        for col in &self.columns {
            if col.role == ColumnRole::Binary && !(col.levels.is_empty() || col.levels.len() == 2) {
                return Err(format!("binary column {} must list exactly 2 levels", col.name));
            }
        }
        Ok(())
    }

    fn is_missing(&self, col: &ColumnSpec, token: &str) -> bool {
        self.missing_markers.iter().any(|m| m == token) || col.missing_markers.iter().any(|m| m == token)
    }
}

/// Reads the schema at `schema_path` and loads its data file, or
/// `data_override` when given.
pub fn load_with_schema(schema_path: &Path, data_override: Option<&Path>) -> Result<Dataset> {
    let schema = Schema::from_file(schema_path)?;
    let data_path = match (data_override, &schema.data_file) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => p.clone(),
        (None, None) => {
            return Err(Error::Schema {
                path: schema_path.to_path_buf(),
                message: "no data_file in schema and no dataset path given".into(),
            })
        }
    };
    load_dataset(&data_path, &schema)
}

pub fn load_dataset(path: &Path, schema: &Schema) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter.as_bytes()[0])
        .has_headers(schema.has_header)
        .comment(schema.comment_prefix.as_ref().map(|p| p.as_bytes()[0]))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(bytes.as_slice());

    let width = schema.columns.len();
    let mut records: Vec<(usize, Vec<String>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| MalformedCsv::from(e).into_error())?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != width {
            return Err(Error::MalformedData {
                row: line,
                column: String::from("*"),
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        records.push((line, rec.iter().map(str::to_owned).collect()));
    }

    let label_col = schema
        .columns
        .iter()
        .position(|c| c.role == ColumnRole::Label)
        .expect("validated schema has a label column");
    let label_spec = &schema.columns[label_col];

    // Rows with a missing label are rejected before anything else is inferred.
    let before = records.len();
    records.retain(|(_, rec)| !schema.is_missing(label_spec, &rec[label_col]));
    let rejected = before - records.len();
    if rejected > 0 {
        log::warn!("{}: dropped {rejected} row(s) with a missing label", schema.name);
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset {
            name: schema.name.clone(),
        });
    }

    let feature_cols: Vec<usize> = schema
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| matches!(c.role, ColumnRole::Numeric | ColumnRole::Binary))
        .map(|(i, _)| i)
        .collect();
    let n = records.len();
    let d = feature_cols.len();
    let mut features = Array2::<f64>::from_elem((n, d), f64::NAN);
    let mut mask = Array2::<bool>::from_elem((n, d), false);

    for (j, &ci) in feature_cols.iter().enumerate() {
        let spec = &schema.columns[ci];
        match spec.role {
            ColumnRole::Numeric => {
                for (r, (line, rec)) in records.iter().enumerate() {
                    let token = rec[ci].as_str();
                    if schema.is_missing(spec, token) {
                        continue;
                    }
                    let value: f64 = token.parse().map_err(|_| Error::MalformedData {
                        row: *line,
                        column: spec.name.clone(),
                        message: format!("{token:?} is neither a number nor a missing marker"),
                    })?;
                    if !value.is_finite() {
                        return Err(Error::MalformedData {
                            row: *line,
                            column: spec.name.clone(),
                            message: format!("{token:?} is not finite"),
                        });
                    }
                    features[[r, j]] = value;
                    mask[[r, j]] = true;
                }
            }
            ColumnRole::Binary => {
                let levels = binary_levels(schema, spec, ci, &records)?;
                for (r, (line, rec)) in records.iter().enumerate() {
                    let token = rec[ci].as_str();
                    if schema.is_missing(spec, token) {
                        continue;
                    }
                    let code = levels
                        .iter()
                        .position(|l| l == token)
                        .ok_or_else(|| Error::MalformedData {
                            row: *line,
                            column: spec.name.clone(),
                            message: format!("{token:?} is not one of the levels {levels:?}"),
                        })?;
                    features[[r, j]] = code as f64;
                    mask[[r, j]] = true;
                }
            }
            _ => unreachable!(),
        }
    }

    let (labels, task) = match schema.task {
        TaskKind::Regression => {
            let mut labels = Vec::with_capacity(n);
            for (line, rec) in &records {
                let token = rec[label_col].as_str();
                let y: f64 = token.parse().map_err(|_| Error::MalformedData {
                    row: *line,
                    column: label_spec.name.clone(),
                    message: format!("{token:?} is not a numeric target"),
                })?;
                labels.push(y);
            }
            (labels, Task::Regression)
        }
        TaskKind::Classification => {
            let classes = if label_spec.classes.is_empty() {
                infer_levels(records.iter().map(|(_, rec)| rec[label_col].as_str()))
            } else {
                label_spec.classes.clone()
            };
            let mut labels = Vec::with_capacity(n);
            for (line, rec) in &records {
                let token = rec[label_col].as_str();
                let idx = classes
                    .iter()
                    .position(|c| c == token)
                    .ok_or_else(|| Error::MalformedData {
                        row: *line,
                        column: label_spec.name.clone(),
                        message: format!("unknown class {token:?}"),
                    })?;
                labels.push(idx as f64);
            }
            (
                labels,
                Task::Classification {
                    num_classes: classes.len().max(2),
                },
            )
        }
    };

    let names = feature_cols.iter().map(|&ci| schema.columns[ci].name.clone()).collect();
    Ok(Dataset::new(schema.name.clone(), features, mask, labels, names, task)?.with_rejected_rows(rejected))
}

fn binary_levels(
    schema: &Schema,
    spec: &ColumnSpec,
    ci: usize,
    records: &[(usize, Vec<String>)],
) -> Result<Vec<String>> {
    if !spec.levels.is_empty() {
        return Ok(spec.levels.clone());
    }
    let levels = infer_levels(
        records
            .iter()
            .map(|(_, rec)| rec[ci].as_str())
            .filter(|t| !schema.is_missing(spec, t)),
    );
    if levels.len() > 2 {
        return Err(Error::MalformedData {
            row: 0,
            column: spec.name.clone(),
            message: format!("binary column has {} distinct values", levels.len()),
        });
    }
    Ok(levels)
}

/// Distinct tokens, ordered numerically when they all parse as numbers and
/// lexicographically otherwise.
fn infer_levels<'a>(tokens: impl Iterator<Item = &'a str>) -> Vec<String> {
    let distinct: BTreeSet<&str> = tokens.collect();
    let mut levels: Vec<String> = distinct.into_iter().map(str::to_owned).collect();
    let numeric: Option<Vec<f64>> = levels.iter().map(|t| t.parse().ok()).collect();
    if let Some(values) = numeric {
        let mut paired: Vec<(f64, String)> = values.into_iter().zip(levels).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0));
        levels = paired.into_iter().map(|(_, t)| t).collect();
    }
    levels
}

struct MalformedCsv(csv::Error);

impl From<csv::Error> for MalformedCsv {
    fn from(e: csv::Error) -> Self {
        MalformedCsv(e)
    }
}

impl MalformedCsv {
    fn into_error(self) -> Error {
        let row = self.0.position().map_or(0, |p| p.line() as usize);
        Error::MalformedData {
            row,
            column: String::from("*"),
            message: self.0.to_string(),
        }
    }
}
