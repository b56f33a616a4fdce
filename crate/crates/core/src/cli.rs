//! The `splitnn` command line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::cluster::{complete_linkage, correlation_distance, cut_dendrogram, DistanceMode};
use crate::config::{ModelChoice, RunConfig};
use crate::data::{load_with_schema, Dataset};
use crate::error::Error;
use crate::harness::{aggregate_report, double_cross_validate, robustness_experiment, ExperimentReport, Metric};
use crate::nn::random_gradient_checks;

#[derive(Debug, Parser)]
#[command(
    name = "splitnn",
    version,
    about = "Feature-clustered split neural networks for tabular data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster the features of one dataset and export the dendrogram.
    Cluster,
    /// Nested cross-validation of vanilla and split networks on each dataset.
    Benchmark,
    /// Train on complete rows, test on the rows with missing values.
    Robustness,
    /// Compare backpropagated and finite-difference gradients on random networks.
    Gradcheck,
    /// Re-render stored reports as a table.
    Report {
        /// Report files (default: `<out>/reports.jsonl`).
        files: Vec<PathBuf>,
    },
}

/// Flags override the config file, which overrides the built-in defaults.
#[derive(Debug, Args, Default)]
pub struct Flags {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Data file overriding the schema's own; repeat once per --schema.
    #[arg(long, global = true)]
    pub dataset: Vec<PathBuf>,
    /// Dataset schema; repeat to benchmark several datasets.
    #[arg(long, global = true)]
    pub schema: Vec<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<ModelChoice>,
    /// Dendrogram cut as a fraction of the tallest merge.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Comma-separated threshold fractions for the inner selection loop.
    #[arg(long, global = true, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores); results are identical for any value.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Skip threshold selection and cut every fold at this fraction.
    #[arg(long, global = true)]
    pub fixed_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub distance_mode: Option<DistanceMode>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
}

/// A failure together with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SchemaNotFound { .. } | Error::Schema { .. } | Error::InvalidConfig(_) => 2,
            _ => 1,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn failed(message: impl Into<String>) -> CliError {
    CliError {
        code: 1,
        message: message.into(),
    }
}

/// Resolves defaults, the config file and flags, in increasing precedence.
pub fn resolve_config(flags: &Flags) -> Result<RunConfig, Error> {
    let mut c = match &flags.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if !flags.schema.is_empty() {
        c.schemas = flags.schema.clone();
        c.datasets.clear();
    }
    if !flags.dataset.is_empty() {
        c.datasets = flags.dataset.clone();
    }
    if let Some(v) = flags.model {
        c.model = v;
    }
    if let Some(v) = flags.threshold {
        c.threshold = v;
    }
    if let Some(v) = &flags.grid {
        c.grid = v.clone();
    }
    if let Some(v) = flags.seed {
        c.seed = v;
    }
    if let Some(v) = flags.jobs {
        c.jobs = v;
    }
    if let Some(v) = &flags.out {
        c.out = v.clone();
    }
    if let Some(v) = flags.fixed_threshold {
        c.fixed_threshold = Some(v);
    }
    if let Some(v) = flags.distance_mode {
        c.distance_mode = v;
    }
    if let Some(v) = flags.epochs {
        c.epochs = v;
    }
    c.validate()?;
    Ok(c)
}

fn write(path: &Path, contents: &str) -> Result<(), Error> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load_first(config: &RunConfig) -> Result<Dataset, Error> {
    let (schema, data) = config.dataset_specs()?.remove(0);
    load_with_schema(&schema, data.as_deref())
}

fn describe(data: &Dataset) -> String {
    format!(
        "{}: N={} d={} missing={:.2}%",
        data.name(),
        data.n_rows(),
        data.n_features(),
        100.0 * data.missing_fraction()
    )
}

fn cmd_cluster(config: &RunConfig) -> Result<(), CliError> {
    let data = load_first(config)?;
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    let tree = complete_linkage(&correlation_distance(&data, &rows, config.distance_mode));
    let clustering = cut_dendrogram(&tree, config.threshold);
    write(&config.out.join("dendrogram.txt"), &tree.to_text())?;
    write(
        &config.out.join("clusters.txt"),
        &clustering.to_text(data.feature_names()),
    )?;
    println!("{}", describe(&data));
    println!("k = {}", clustering.k());
    let sizes: Vec<String> = clustering.cluster_sizes().iter().map(|m| m.to_string()).collect();
    println!("cluster sizes: {}", sizes.join(" "));
    Ok(())
}

/// One table per metric, in order of first appearance.
fn render_tables(reports: &[ExperimentReport]) -> Result<String, Error> {
    let mut out = String::new();
    for metric in [Metric::Accuracy, Metric::Rmse] {
        let group: Vec<ExperimentReport> = reports.iter().filter(|r| r.metric == metric).cloned().collect();
        if !group.is_empty() {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&aggregate_report(&group)?.rendered);
        }
    }
    Ok(out)
}

fn write_reports(config: &RunConfig, reports: &[ExperimentReport], table: &str) -> Result<(), Error> {
    let jsonl: String = reports.iter().map(|r| r.to_json() + "\n").collect();
    write(&config.out.join("reports.jsonl"), &jsonl)?;
    write(&config.out.join("table.txt"), table)
}

fn cmd_benchmark(config: &RunConfig) -> Result<(), CliError> {
    let specs = config.dataset_specs()?;
    if let Some((missing, _)) = specs.iter().find(|(s, _)| !s.exists()) {
        return Err(Error::SchemaNotFound { path: missing.clone() }.into());
    }
    let mut reports = Vec::new();
    let mut failures = 0;
    for (schema, data_file) in &specs {
        let data = match load_with_schema(schema, data_file.as_deref()) {
            Ok(d) => d,
            Err(e) => {
                eprintln!("error: skipping {}: {e}", schema.display());
                failures += 1;
                continue;
            }
        };
        eprintln!("{}", describe(&data));
        for kind in config.model.kinds() {
            match double_cross_validate(&data, &config.cv_settings(kind)) {
                Ok(r) => {
                    eprintln!(
                        "  {kind}: {:.4} ± {:.4} (k per fold {:?}, {:.1}s)",
                        r.mean, r.std, r.config.k_per_fold, r.wall_time_seconds
                    );
                    if !r.failed_folds.is_empty() {
                        eprintln!("  {kind}: folds {:?} diverged twice and were dropped", r.failed_folds);
                        failures += 1;
                    }
                    reports.push(r);
                }
                Err(e) => {
                    eprintln!("error: {} {kind}: {e}", data.name());
                    failures += 1;
                }
            }
        }
    }
    let table = if reports.is_empty() {
        String::new()
    } else {
        render_tables(&reports)?
    };
    write_reports(config, &reports, &table)?;
    print!("{table}");
    if failures > 0 {
        return Err(failed(format!("{failures} dataset or model run(s) failed")));
    }
    Ok(())
}

fn cmd_robustness(config: &RunConfig) -> Result<(), CliError> {
    let data = load_first(config)?;
    eprintln!("{}", describe(&data));
    let outcome = robustness_experiment(&data, &config.robustness_settings())?;
    let mut table = format!(
        "{}: test rows {} of {} ({:.1}%), train {}, validation {}\n",
        data.name(),
        outcome.test_rows.len(),
        data.n_rows(),
        100.0 * outcome.test_fraction(),
        outcome.train_rows.len(),
        outcome.val_rows.len()
    );
    let width = outcome.reports.iter().map(|r| r.label.len()).max().unwrap_or(0).max(5);
    writeln!(
        table,
        "{:<width$}  {:>3}  {:>8}  {:>9}",
        "model", "k", "val rmse", "test rmse"
    )
    .unwrap();
    for r in &outcome.reports {
        writeln!(
            table,
            "{:<width$}  {:>3}  {:>8.3}  {:>9.3}",
            r.label,
            r.config.k_per_fold[0],
            r.validation_metric.unwrap_or(f64::NAN),
            r.mean
        )
        .unwrap();
    }
    write_reports(config, &outcome.reports, &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_gradcheck(config: &RunConfig) -> Result<(), CliError> {
    let trials = random_gradient_checks(config.gradcheck_networks, config.seed, config.gradcheck_epsilon)?;
    let mut jsonl = String::new();
    let mut worst: f64 = 0.0;
    for t in &trials {
        jsonl.push_str(&serde_json::to_string(t).expect("trial serializes"));
        jsonl.push('\n');
        worst = worst.max(t.max_relative_error);
    }
    write(&config.out.join("gradcheck.jsonl"), &jsonl)?;
    println!(
        "{} networks, worst relative error {worst:.3e} (tolerance {:.0e})",
        trials.len(),
        config.gradcheck_tolerance
    );
    if worst >= config.gradcheck_tolerance {
        return Err(failed("gradient check exceeded tolerance"));
    }
    Ok(())
}

fn cmd_report(config: &RunConfig, files: &[PathBuf]) -> Result<(), CliError> {
    let default = [config.out.join("reports.jsonl")];
    let files = if files.is_empty() { &default[..] } else { files };
    let mut reports = Vec::new();
    for f in files {
        let text = fs::read_to_string(f).map_err(|e| Error::Io {
            path: f.clone(),
            source: e,
        })?;
        reports.extend(ExperimentReport::parse_jsonl(&text)?);
    }
    for r in &reports {
        r.check_consistency()
            .map_err(|e| failed(format!("{} {}: {e}", r.dataset, r.label)))?;
    }
    print!("{}", aggregate_report(&reports)?.rendered);
    Ok(())
}

/// Runs one command.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let config = resolve_config(&cli.flags)?;
    if !matches!(cli.command, Command::Report { .. }) {
        config.write_resolved()?;
    }
    match &cli.command {
        Command::Cluster => cmd_cluster(&config),
        Command::Benchmark => cmd_benchmark(&config),
        Command::Robustness => cmd_robustness(&config),
        Command::Gradcheck => cmd_gradcheck(&config),
        Command::Report { files } => cmd_report(&config, files),
    }
}

/// Parses arguments, runs, and maps the outcome to an exit code: 0 on
/// success, 2 for usage, configuration and schema problems, 1 otherwise.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
