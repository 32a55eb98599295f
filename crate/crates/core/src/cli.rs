//! Command-line driver: a TOML run configuration plus flag overrides, with
//! three subcommands (rank, evaluate, attribute). Every run is deterministic
//! given the config and seed; the seed must be stated explicitly.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::classifiers::{ArmParams, C45Params, MlpParams, NbParams};
use crate::error::{Error, Result};
use crate::evaluate::{
    cross_validate, ClassifierSpec, CvOptions, FeatureSelection, FittedPipeline,
};
use crate::flow_model::Dataset;
use crate::forensics::{
    attribute_flows, emit_report, ForensicReport, GroupBy, ReportFormat, ReportMeta,
};
use crate::ingest::{
    impute_missing, merge_datasets, parse_flow_csv, ImputePolicy, NumericFill, SchemaDescriptor,
};
use crate::preprocess::{rank_features, select_top_k};

/// Fixed report ordering for multi-classifier evaluation.
const CLASSIFIER_ORDER: [&str; 4] = ["arm", "dt", "nb", "ann"];

#[derive(Debug, Parser)]
#[command(
    name = "flowforensics",
    about = "Flow-based botnet detection and forensic attribution",
    version
)]
pub struct Cli {
    /// Path to the TOML run configuration.
    #[arg(long, global = true, default_value = "flowforensics.toml")]
    pub config: PathBuf,
    /// Override the attribution classifier tag.
    #[arg(long, global = true, value_parser = ["arm", "dt", "nb", "ann"])]
    pub classifier: Option<String>,
    /// Override the number of top-ranked features kept.
    #[arg(long, global = true)]
    pub top_k: Option<usize>,
    /// Override the number of cross-validation folds.
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    /// Override the run seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the feature-selection protocol.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,
    /// Override the output file of the invoked command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank features by information gain and write the ranking file.
    Rank,
    /// Cross-validate the configured classifiers and write the report.
    Evaluate,
    /// Train, predict the target set, and write the forensic report.
    Attribute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Rank once on the full dataset, then fold (matches the published
    /// protocol; leaks ranking information across folds).
    Reproduction,
    /// Re-rank inside each training fold (no leakage).
    Rigorous,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub params: ParamsConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Training CSVs, merged in order.
    pub paths: Vec<PathBuf>,
    /// Schema descriptor applying to every listed CSV.
    pub schema: PathBuf,
    /// Attribution target; defaults to the merged training data.
    pub target: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Mandatory so no run is silently nondeterministic.
    pub seed: u64,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub impute: Impute,
    /// Classifiers to evaluate; reports always appear in the fixed order
    /// arm, dt, nb, ann.
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<String>,
    /// Classifier used by the attribute command.
    #[serde(default = "default_classifier")]
    pub classifier: String,
}

fn default_top_k() -> usize {
    10
}
fn default_folds() -> usize {
    10
}
fn default_mode() -> Mode {
    Mode::Reproduction
}
fn default_classifiers() -> Vec<String> {
    CLASSIFIER_ORDER.iter().map(|s| s.to_string()).collect()
}
fn default_classifier() -> String {
    "dt".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Impute {
    #[default]
    Median,
    Zero,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub report_format: OutFormat,
    #[serde(default)]
    pub group_by: Grouping,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out_dir(),
            report_format: OutFormat::default(),
            group_by: Grouping::default(),
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from(".")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutFormat {
    #[default]
    Delimited,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    #[default]
    Source,
    Destination,
}

/// Optional per-classifier hyperparameter tables.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default)]
    pub arm: Option<ArmParams>,
    #[serde(default)]
    pub dt: Option<C45Params>,
    #[serde(default)]
    pub nb: Option<NbParams>,
    #[serde(default)]
    pub ann: Option<MlpParams>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.data.paths.is_empty() {
            return Err(Error::Config("data.paths must list at least one CSV".into()));
        }
        if self.pipeline.folds < 2 {
            return Err(Error::Config("pipeline.folds must be at least 2".into()));
        }
        if self.pipeline.top_k == 0 {
            return Err(Error::Config("pipeline.top_k must be positive".into()));
        }
        for tag in self.pipeline.classifiers.iter().chain([&self.pipeline.classifier]) {
            if !CLASSIFIER_ORDER.contains(&tag.as_str()) {
                return Err(Error::Config(format!(
                    "unknown classifier tag {tag:?}; valid tags: arm, dt, nb, ann"
                )));
            }
        }
        Ok(())
    }

    /// Applies command-line overrides on top of the file values.
    pub fn apply_overrides(&mut self, cli: &Cli) {
        if let Some(t) = &cli.classifier {
            self.pipeline.classifier = t.clone();
        }
        if let Some(k) = cli.top_k {
            self.pipeline.top_k = k;
        }
        if let Some(f) = cli.folds {
            self.pipeline.folds = f;
        }
        if let Some(s) = cli.seed {
            self.pipeline.seed = s;
        }
        if let Some(m) = cli.mode {
            self.pipeline.mode = m;
        }
    }

    fn spec_for(&self, tag: &str) -> Result<ClassifierSpec> {
        Ok(match tag {
            "arm" => ClassifierSpec::Arm(self.params.arm.unwrap_or_default()),
            "dt" => ClassifierSpec::Dt(self.params.dt.unwrap_or_default()),
            "nb" => ClassifierSpec::Nb(self.params.nb.unwrap_or_default()),
            "ann" => ClassifierSpec::Ann(self.params.ann.unwrap_or_default()),
            other => {
                return Err(Error::Config(format!(
                    "unknown classifier tag {other:?}; valid tags: arm, dt, nb, ann"
                )))
            }
        })
    }

    fn impute_policy(&self) -> ImputePolicy {
        ImputePolicy {
            numeric_fill: match self.pipeline.impute {
                Impute::Median => NumericFill::Median,
                Impute::Zero => NumericFill::Zero,
            },
        }
    }

    fn load_csv(&self, descriptor: &SchemaDescriptor, path: &Path) -> Result<Dataset> {
        let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let d = parse_flow_csv(std::io::BufReader::new(file), descriptor)?;
        impute_missing(&d, self.impute_policy())
    }

    /// Loads and merges every training CSV under the configured schema.
    pub fn load_training(&self) -> Result<Dataset> {
        let descriptor = SchemaDescriptor::load(&self.data.schema)?;
        let mut merged: Option<Dataset> = None;
        for path in &self.data.paths {
            let next = self.load_csv(&descriptor, path)?;
            merged = Some(match merged {
                None => next,
                Some(acc) => merge_datasets(&acc, &next)?,
            });
        }
        Ok(merged.expect("validated non-empty paths"))
    }

    pub fn load_target(&self) -> Result<Dataset> {
        match &self.data.target {
            Some(path) => {
                let descriptor = SchemaDescriptor::load(&self.data.schema)?;
                self.load_csv(&descriptor, path)
            }
            None => self.load_training(),
        }
    }

    fn dataset_id(&self) -> String {
        self.data
            .paths
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join("+")
    }
}

fn write_output(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

fn out_path(cfg: &RunConfig, cli_out: &Option<PathBuf>, name: &str) -> PathBuf {
    cli_out.clone().unwrap_or_else(|| cfg.output.dir.join(name))
}

pub fn cmd_rank(cfg: &RunConfig, out: &Path, top_k: usize) -> Result<String> {
    let d = cfg.load_training()?;
    let ranking = rank_features(&d)?;
    write_output(out, &ranking.export())?;
    let shown: String = ranking
        .export()
        .lines()
        .take(top_k)
        .collect::<Vec<_>>()
        .join("\n");
    Ok(format!("{shown}\nranking written to {}\n", out.display()))
}

pub fn cmd_evaluate(cfg: &RunConfig, out: &Path) -> Result<String> {
    let d = cfg.load_training()?;
    let top_k = cfg.pipeline.top_k.min(d.schema().n_features());
    let selection = match cfg.pipeline.mode {
        Mode::Reproduction => {
            let ranking = rank_features(&d)?;
            FeatureSelection::Fixed(select_top_k(&ranking, top_k)?)
        }
        Mode::Rigorous => FeatureSelection::FoldLocal(top_k),
    };
    let opts = CvOptions {
        folds: cfg.pipeline.folds,
        seed: cfg.pipeline.seed,
        selection,
    };
    let mut report = String::new();
    for tag in CLASSIFIER_ORDER {
        if !cfg.pipeline.classifiers.iter().any(|t| t == tag) {
            continue;
        }
        let cv = cross_validate(&d, &cfg.spec_for(tag)?, &opts)?;
        report.push_str(&cv.export());
        report.push('\n');
    }
    write_output(out, &report)?;
    Ok(format!("{report}evaluation written to {}\n", out.display()))
}

pub fn cmd_attribute(cfg: &RunConfig, out: &Path) -> Result<String> {
    let train = cfg.load_training()?;
    let target = cfg.load_target()?;

    let top_k = cfg.pipeline.top_k.min(train.schema().n_features());
    let ranking = rank_features(&train)?;
    let keep = select_top_k(&ranking, top_k)?;
    let train = train.project_features(&keep)?;
    let target = target.project_features(&keep)?;

    let spec = cfg.spec_for(&cfg.pipeline.classifier)?;
    let pipeline = FittedPipeline::fit(&train, &spec)?;
    let view = pipeline.transform(&target)?;
    let attributed = attribute_flows(&view, &pipeline.model)?;

    let meta = ReportMeta {
        dataset_id: cfg.dataset_id(),
        seed: cfg.pipeline.seed,
        params: format!(
            "classifier={} top_k={} folds={} mode={:?}",
            cfg.pipeline.classifier, cfg.pipeline.top_k, cfg.pipeline.folds, cfg.pipeline.mode
        ),
    };
    let group_by = match cfg.output.group_by {
        Grouping::Source => GroupBy::Source,
        Grouping::Destination => GroupBy::Destination,
    };
    let report = ForensicReport::build(attributed, cfg.pipeline.classifier.clone(), meta, group_by);
    let format = match cfg.output.report_format {
        OutFormat::Delimited => ReportFormat::Delimited,
        OutFormat::Table => ReportFormat::Table,
    };
    let text = emit_report(&report, format);
    write_output(out, &text)?;
    Ok(format!("report written to {}\n", out.display()))
}

/// Runs a parsed invocation; the binary maps the error to an exit code.
pub fn run(cli: &Cli) -> Result<String> {
    let mut cfg = RunConfig::load(&cli.config)?;
    cfg.apply_overrides(cli);
    match cli.command {
        Command::Rank => {
            let out = out_path(&cfg, &cli.out, "ranking.txt");
            cmd_rank(&cfg, &out, cfg.pipeline.top_k)
        }
        Command::Evaluate => {
            let out = out_path(&cfg, &cli.out, "evaluation.txt");
            cmd_evaluate(&cfg, &out)
        }
        Command::Attribute => {
            let out = out_path(&cfg, &cli.out, "report.txt");
            cmd_attribute(&cfg, &out)
        }
    }
}

/// Exit code for an error per the documented contract: usage/config
/// problems exit 1, data problems exit 2.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) => 1,
        _ => 2,
    }
}
