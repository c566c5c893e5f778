//! Command-line front end: `validate`, `run`, `eval` and `report`.
//!
//! Layout of an output directory:
//!
//! ```text
//! <output_dir>/config.resolved.toml
//! <output_dir>/traces/<backend>__<strategy>.jsonl
//! <output_dir>/errors.jsonl
//! <output_dir>/results.csv
//! <output_dir>/report/
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{BackendConfig, Summarizer};
use crate::budget::{budget_example, BudgetConfig, BudgetedExample};
use crate::corpus::{cap_per_day, dataset_stats, load_dataset, Dataset, DatasetStats, Split};
use crate::eval::{retention_analysis, score_example, summary_word_limit, RecallMetric, DEFAULT_ACU_THRESHOLD};
use crate::report::{write_reports, Metric, ResultRow, RunResults};
use crate::retrieval::{Embedder, EmbedderConfig};
use crate::strategies::{Pipeline, Strategy, StrategyFailure, SummaryTrace};
use crate::tokenizer::TokenizerHandle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorCategory {
    Config,
    Io,
    Backend,
    Validation,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Io => 3,
            ErrorCategory::Backend => 4,
            ErrorCategory::Validation => 5,
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Io => "io",
            ErrorCategory::Backend => "backend",
            ErrorCategory::Validation => "validation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub category: ErrorCategory,
    pub message: String,
}

impl CliError {
    pub fn new(category: ErrorCategory, message: impl Into<String>) -> Self {
        Self {
            category,
            message: message.into(),
        }
    }

    fn config(message: impl fmt::Display) -> Self {
        Self::new(ErrorCategory::Config, message.to_string())
    }

    fn validation(message: impl fmt::Display) -> Self {
        Self::new(ErrorCategory::Validation, message.to_string())
    }

    fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::new(ErrorCategory::Io, format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.category, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<crate::corpus::CorpusError> for CliError {
    fn from(e: crate::corpus::CorpusError) -> Self {
        use crate::corpus::CorpusError;
        match e {
            CorpusError::Io { .. } => Self::new(ErrorCategory::Io, e.to_string()),
            other => Self::validation(other),
        }
    }
}

impl From<crate::report::ReportError> for CliError {
    fn from(e: crate::report::ReportError) -> Self {
        use crate::report::ReportError;
        match e {
            ReportError::Io { .. } | ReportError::Csv(_) => Self::new(ErrorCategory::Io, e.to_string()),
            other => Self::validation(other),
        }
    }
}

fn default_workers() -> usize {
    1
}

fn default_theta() -> f64 {
    DEFAULT_ACU_THRESHOLD
}

fn default_split() -> Split {
    Split::Test
}

/// A run read from TOML. Relative paths resolve against the config file's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_path: PathBuf,
    #[serde(default = "default_split")]
    pub split: Split,
    /// Split used to derive `num_words` when it is not set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_path: Option<PathBuf>,
    pub strategies: Vec<Strategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_words: Option<usize>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_docs_per_day: Option<usize>,
    #[serde(default = "default_theta")]
    pub acu_threshold: f64,
    /// Recall used for retention; per example, `acu` when ACUs exist and
    /// `rouge1_recall` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retention_metric: Option<RecallMetric>,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub tokenizer: TokenizerHandle,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(CliError::config)?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut cfg.dataset_path);
        resolve(&mut cfg.output_dir);
        if let Some(v) = cfg.validation_path.as_mut() {
            resolve(v);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs serialize to TOML")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.workers == 0 {
            return Err(CliError::config("workers must be at least 1"));
        }
        if self.strategies.is_empty() {
            return Err(CliError::config("strategies must not be empty"));
        }
        if self.num_words == Some(0) {
            return Err(CliError::config("num_words must be at least 1"));
        }
        if !(self.acu_threshold > 0.0 && self.acu_threshold <= 1.0) {
            return Err(CliError::config("acu_threshold must lie in (0, 1]"));
        }
        self.budget.validate().map_err(CliError::config)?;
        self.tokenizer.validate().map_err(CliError::config)?;
        self.backend.validate().map_err(CliError::config)?;
        if self.strategies.contains(&Strategy::Retrieval) {
            self.embedder.validate().map_err(CliError::config)?;
        }
        Ok(())
    }

    pub fn traces_dir(&self) -> PathBuf {
        self.output_dir.join("traces")
    }

    pub fn results_path(&self) -> PathBuf {
        self.output_dir.join("results.csv")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.output_dir.join("report")
    }
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub strategies: Vec<Strategy>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl RunOverrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if !self.strategies.is_empty() {
            cfg.strategies = self.strategies.clone();
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(o) = &self.output_dir {
            cfg.output_dir = o.clone();
        }
    }
}

pub fn cmd_validate(path: &Path, split: Split) -> Result<DatasetStats, CliError> {
    let dataset = load_dataset(path, split)?;
    Ok(dataset_stats(&dataset))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyRun {
    pub strategy: Strategy,
    pub trace_path: PathBuf,
    pub written: usize,
    pub skipped: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub num_words: usize,
    pub runs: Vec<StrategyRun>,
}

impl RunSummary {
    pub fn failed(&self) -> usize {
        self.runs.iter().map(|r| r.failed).sum()
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    backend: &'a str,
    strategy: Strategy,
    example_id: &'a str,
    category: ErrorCategory,
    message: String,
    completed_stages: usize,
}

fn file_stem(backend: &str, strategy: Strategy) -> String {
    let safe: String = backend
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}__{strategy}.jsonl")
}

/// Example ids already present in a trace file. A trailing partial or
/// unparseable line, left by an interrupted run, is cut off.
fn completed_ids(path: &Path) -> Result<BTreeSet<String>, CliError> {
    let mut done = BTreeSet::new();
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(done),
        Err(e) => return Err(CliError::io(path, e)),
    };
    let mut good = 0usize;
    for line in text.split_inclusive('\n') {
        if !line.ends_with('\n') {
            break;
        }
        match serde_json::from_str::<SummaryTrace>(line) {
            Ok(trace) => {
                done.insert(trace.example_id);
                good += line.len();
            }
            Err(_) => break,
        }
    }
    if good < text.len() {
        log::warn!("{}: dropping {} trailing bytes from an interrupted run", path.display(), text.len() - good);
        let f = OpenOptions::new().write(true).open(path).map_err(|e| CliError::io(path, e))?;
        f.set_len(good as u64).map_err(|e| CliError::io(path, e))?;
    }
    Ok(done)
}

fn num_words_for(cfg: &RunConfig) -> Result<usize, CliError> {
    if let Some(n) = cfg.num_words {
        return Ok(n);
    }
    let path = cfg
        .validation_path
        .as_ref()
        .ok_or_else(|| CliError::config("set num_words or validation_path"))?;
    let validation = load_dataset(path, Split::Validation)?;
    let refs: Vec<&str> = validation
        .examples
        .iter()
        .flat_map(|e| e.references.iter().map(String::as_str))
        .collect();
    summary_word_limit(&refs).ok_or_else(|| CliError::validation("validation split has no references"))
}

fn failure_category(f: &StrategyFailure) -> ErrorCategory {
    match f {
        StrategyFailure::Backend(_) => ErrorCategory::Backend,
        StrategyFailure::Retrieval(crate::retrieval::RetrievalError::Http(_)) => ErrorCategory::Backend,
        StrategyFailure::Retrieval(_) | StrategyFailure::MissingEmbedder => ErrorCategory::Validation,
    }
}

/// Executes every configured strategy over the dataset, appending one trace
/// line per example. Finished examples are skipped, so re-running after an
/// interruption only calls the backend for the rest.
pub fn cmd_run(mut cfg: RunConfig, overrides: &RunOverrides) -> Result<RunSummary, CliError> {
    overrides.apply(&mut cfg);
    cfg.validate()?;
    let summarizer: Box<dyn Summarizer> = cfg.backend.build().map_err(CliError::config)?;
    let embedder: Option<Box<dyn Embedder>> = if cfg.strategies.contains(&Strategy::Retrieval) {
        Some(cfg.embedder.build().map_err(CliError::config)?)
    } else {
        None
    };

    let mut dataset = load_dataset(&cfg.dataset_path, cfg.split)?;
    if let Some(cap) = cfg.max_docs_per_day {
        dataset.examples = dataset
            .examples
            .iter()
            .map(|ex| cap_per_day(ex, cap))
            .collect::<Result<_, _>>()?;
    }
    let num_words = num_words_for(&cfg)?;
    cfg.num_words = Some(num_words);

    let traces_dir = cfg.traces_dir();
    fs::create_dir_all(&traces_dir).map_err(|e| CliError::io(&traces_dir, e))?;
    let echo = cfg.output_dir.join("config.resolved.toml");
    fs::write(&echo, cfg.to_toml()).map_err(|e| CliError::io(&echo, e))?;
    let errors_path = cfg.output_dir.join("errors.jsonl");
    let mut errors = File::create(&errors_path).map_err(|e| CliError::io(&errors_path, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(CliError::config)?;
    let tok = &cfg.tokenizer;
    let budgeted: Vec<Result<BudgetedExample, String>> = pool.install(|| {
        dataset
            .examples
            .par_iter()
            .map(|ex| budget_example(ex, &cfg.budget, tok).map_err(|e| e.to_string()))
            .collect()
    });
    let pipeline = Pipeline {
        summarizer: summarizer.as_ref(),
        tokenizer: tok,
        budget: &cfg.budget,
        num_words,
        embedder: embedder.as_deref(),
    };
    let backend_name = summarizer.name().to_string();

    let mut summary = RunSummary {
        num_words,
        runs: Vec::new(),
    };
    let mut worst: Option<ErrorCategory> = None;
    for &strategy in &cfg.strategies {
        let trace_path = traces_dir.join(file_stem(&backend_name, strategy));
        let done = completed_ids(&trace_path)?;
        let pending: Vec<usize> = (0..dataset.examples.len())
            .filter(|&i| !done.contains(&dataset.examples[i].id))
            .collect();
        let mut out = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&trace_path)
            .map_err(|e| CliError::io(&trace_path, e))?;
        let mut run = StrategyRun {
            strategy,
            trace_path: trace_path.clone(),
            written: 0,
            skipped: dataset.examples.len() - pending.len(),
            failed: 0,
        };

        // Batches keep writes in dataset order while bounding lost work on
        // interruption to one batch.
        for batch in pending.chunks(cfg.workers * 4) {
            let results: Vec<Result<SummaryTrace, ErrorRecord>> = pool.install(|| {
                batch
                    .par_iter()
                    .map(|&i| {
                        let id = dataset.examples[i].id.as_str();
                        let ex = budgeted[i].as_ref().map_err(|message| ErrorRecord {
                            backend: &backend_name,
                            strategy,
                            example_id: id,
                            category: ErrorCategory::Validation,
                            message: message.clone(),
                            completed_stages: 0,
                        })?;
                        pipeline.run(strategy, ex).map_err(|e| ErrorRecord {
                            backend: &backend_name,
                            strategy,
                            example_id: id,
                            category: failure_category(&e.source),
                            message: e.source.to_string(),
                            completed_stages: e.partial.stages.len(),
                        })
                    })
                    .collect()
            });
            let mut lines = String::new();
            for result in results {
                match result {
                    Ok(trace) => {
                        lines += &serde_json::to_string(&trace).expect("traces serialize");
                        lines.push('\n');
                        run.written += 1;
                    }
                    Err(record) => {
                        log::error!("{strategy} failed on `{}`: {}", record.example_id, record.message);
                        worst = Some(match worst {
                            Some(ErrorCategory::Backend) => ErrorCategory::Backend,
                            _ => record.category,
                        });
                        let line = serde_json::to_string(&record).expect("error records serialize");
                        writeln!(errors, "{line}").map_err(|e| CliError::io(&errors_path, e))?;
                        run.failed += 1;
                    }
                }
            }
            out.write_all(lines.as_bytes()).map_err(|e| CliError::io(&trace_path, e))?;
            out.flush().map_err(|e| CliError::io(&trace_path, e))?;
        }
        log::info!(
            "{strategy}: {} written, {} skipped, {} failed",
            run.written,
            run.skipped,
            run.failed
        );
        summary.runs.push(run);
    }

    match worst {
        None => Ok(summary),
        Some(category) => Err(CliError::new(
            category,
            format!("{} example runs failed; see {}", summary.failed(), errors_path.display()),
        )),
    }
}

/// Every `*.jsonl` trace under `dir`, in file-name order.
pub fn read_traces(dir: &Path) -> Result<Vec<SummaryTrace>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    let mut traces = Vec::new();
    for file in files {
        let text = fs::read_to_string(&file).map_err(|e| CliError::io(&file, e))?;
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let trace = serde_json::from_str(line)
                .map_err(|e| CliError::validation(format!("{}:{}: {e}", file.display(), n + 1)))?;
            traces.push(trace);
        }
    }
    Ok(traces)
}

/// Scores every trace against its example's references.
pub fn cmd_eval(
    traces: &[SummaryTrace],
    dataset: &Dataset,
    theta: f64,
    metric: Option<RecallMetric>,
) -> Result<RunResults, CliError> {
    let index: BTreeMap<&str, usize> = dataset
        .examples
        .iter()
        .enumerate()
        .map(|(i, e)| (e.id.as_str(), i))
        .collect();
    let rows: Vec<Result<ResultRow, CliError>> = traces
        .par_iter()
        .map(|trace| {
            let ex = index
                .get(trace.example_id.as_str())
                .map(|&i| &dataset.examples[i])
                .ok_or_else(|| CliError::validation(format!("trace for unknown example `{}`", trace.example_id)))?;
            let acus = ex.acus.as_deref();
            let metric = metric.unwrap_or(if acus.is_some() {
                RecallMetric::Acu
            } else {
                RecallMetric::Rouge1Recall
            });
            let scores = score_example(trace, &ex.references, acus, theta).map_err(CliError::validation)?;
            let retention =
                retention_analysis(trace, &ex.references, acus, metric, theta).map_err(CliError::validation)?;
            Ok(ResultRow::new(
                &trace.example_id,
                trace.strategy,
                &trace.backend,
                &scores,
                Some(&retention),
            ))
        })
        .collect();
    Ok(RunResults::new(rows.into_iter().collect::<Result<_, _>>()?)?)
}

/// Writes every report table into `dir` and returns the text rendering.
pub fn cmd_report(results: &RunResults, metric: Option<Metric>, dir: &Path) -> Result<String, CliError> {
    let metric = metric.unwrap_or_else(|| {
        if !results.rows().is_empty() && results.rows().iter().all(|r| r.acu_recall.is_some()) {
            Metric::AcuRecall
        } else {
            Metric::Rouge1
        }
    });
    Ok(write_reports(results, metric, dir)?)
}

#[derive(Debug, Parser)]
#[command(name = "mdsbench", version, about = "Multi-document summarization pipelines and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset file and print its statistics.
    Validate {
        #[arg(long, required_unless_present = "config")]
        dataset: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Run strategies over a dataset and write traces.
    Run(RunArgs),
    /// Score traces and write a results CSV.
    Eval(EvalArgs),
    /// Aggregate a results CSV into tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Strategies to run instead of the configured ones.
    #[arg(long, value_delimiter = ',')]
    pub strategy: Vec<Strategy>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory instead of the configured one.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    pub traces: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<Split>,
    /// Results CSV path.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub metric: Option<RecallMetric>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    pub results: Option<PathBuf>,
    /// Directory for report files.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub metric: Option<Metric>,
}

fn load_config(path: &Option<PathBuf>) -> Result<Option<RunConfig>, CliError> {
    path.as_deref().map(RunConfig::load).transpose()
}

fn dispatch(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Validate { dataset, config, split } => {
            let cfg = load_config(&config)?;
            let path = dataset
                .or_else(|| cfg.map(|c| c.dataset_path))
                .expect("clap requires --dataset or --config");
            let stats = cmd_validate(&path, split)?;
            Ok(format!("{}: {stats}\n", path.display()))
        }
        Command::Run(args) => {
            let cfg = RunConfig::load(&args.config)?;
            let overrides = RunOverrides {
                strategies: args.strategy,
                workers: args.workers,
                output_dir: args.output,
            };
            let summary = cmd_run(cfg, &overrides)?;
            let mut out = format!("num_words={}\n", summary.num_words);
            for r in &summary.runs {
                out += &format!(
                    "{}: written={} skipped={} failed={} -> {}\n",
                    r.strategy,
                    r.written,
                    r.skipped,
                    r.failed,
                    r.trace_path.display()
                );
            }
            Ok(out)
        }
        Command::Eval(args) => {
            let cfg = load_config(&args.config)?;
            let traces_dir = args
                .traces
                .or_else(|| cfg.as_ref().map(RunConfig::traces_dir))
                .expect("clap requires --traces or --config");
            let dataset_path = args
                .dataset
                .or_else(|| cfg.as_ref().map(|c| c.dataset_path.clone()))
                .expect("clap requires --dataset or --config");
            let split = args.split.or(cfg.as_ref().map(|c| c.split)).unwrap_or(Split::Test);
            let output = args
                .output
                .or_else(|| cfg.as_ref().map(RunConfig::results_path))
                .unwrap_or_else(|| PathBuf::from("results.csv"));
            let theta = args
                .theta
                .or(cfg.as_ref().map(|c| c.acu_threshold))
                .unwrap_or(DEFAULT_ACU_THRESHOLD);
            let metric = args.metric.or(cfg.as_ref().and_then(|c| c.retention_metric));
            let workers = args.workers.or(cfg.as_ref().map(|c| c.workers)).unwrap_or(1).max(1);

            let dataset = load_dataset(&dataset_path, split)?;
            let traces = read_traces(&traces_dir)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(CliError::config)?;
            let results = pool.install(|| cmd_eval(&traces, &dataset, theta, metric))?;
            if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            results.write_csv(&output)?;
            Ok(format!("{} rows -> {}\n", results.rows().len(), output.display()))
        }
        Command::Report(args) => {
            let cfg = load_config(&args.config)?;
            let results_path = args
                .results
                .or_else(|| cfg.as_ref().map(RunConfig::results_path))
                .expect("clap requires --results or --config");
            let dir = args
                .output
                .or_else(|| cfg.as_ref().map(RunConfig::report_dir))
                .unwrap_or_else(|| PathBuf::from("report"));
            let results = RunResults::read_csv(&results_path)?;
            cmd_report(&results, args.metric, &dir)
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ErrorCategory::Config.exit_code() } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.category.exit_code()
        }
    }
}
