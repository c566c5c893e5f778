//! Aggregate tables over evaluated runs.
//!
//! Every table is keyed by `(backend, strategy)` and emitted in that order,
//! so regenerating from the same results CSV gives the same bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{EvalScores, Prf, RecallMetric, RetentionReport};
use crate::strategies::Strategy;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("duplicate result row for example `{example_id}`, {strategy}, backend `{backend}`")]
    DuplicateRow {
        example_id: String,
        strategy: Strategy,
        backend: String,
    },
    #[error("backend `{0}` has no full_context rows to compare against")]
    MissingBaseline(String),
    #[error("full_context mean for backend `{0}` is zero; relative deltas are undefined")]
    ZeroBaseline(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One evaluated trace, flattened for CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub example_id: String,
    pub strategy: Strategy,
    pub backend: String,
    pub rouge1_precision: f64,
    pub rouge1_recall: f64,
    pub rouge1_f1: f64,
    pub rouge2_precision: f64,
    pub rouge2_recall: f64,
    pub rouge2_f1: f64,
    pub rouge_l_precision: f64,
    pub rouge_l_recall: f64,
    pub rouge_l_f1: f64,
    pub rouge_lsum_precision: f64,
    pub rouge_lsum_recall: f64,
    pub rouge_lsum_f1: f64,
    pub acu_recall: Option<f64>,
    pub summary_words: usize,
    pub retention_metric: Option<RecallMetric>,
    pub final_recall: Option<f64>,
    pub best_intermediate_recall: Option<f64>,
    pub best_stage: Option<String>,
    pub best_stage_words: Option<usize>,
}

impl ResultRow {
    pub fn new(
        example_id: impl Into<String>,
        strategy: Strategy,
        backend: impl Into<String>,
        scores: &EvalScores,
        retention: Option<&RetentionReport>,
    ) -> Self {
        let Prf { precision: p1, recall: r1, f1: f1_1 } = scores.rouge1;
        let Prf { precision: p2, recall: r2, f1: f1_2 } = scores.rouge2;
        let Prf { precision: pl, recall: rl, f1: f1_l } = scores.rouge_l;
        let Prf { precision: ps, recall: rs, f1: f1_s } = scores.rouge_lsum;
        Self {
            example_id: example_id.into(),
            strategy,
            backend: backend.into(),
            rouge1_precision: p1,
            rouge1_recall: r1,
            rouge1_f1: f1_1,
            rouge2_precision: p2,
            rouge2_recall: r2,
            rouge2_f1: f1_2,
            rouge_l_precision: pl,
            rouge_l_recall: rl,
            rouge_l_f1: f1_l,
            rouge_lsum_precision: ps,
            rouge_lsum_recall: rs,
            rouge_lsum_f1: f1_s,
            acu_recall: scores.acu_recall,
            summary_words: scores.summary_words,
            retention_metric: retention.map(|r| r.metric),
            final_recall: retention.map(|r| r.final_recall),
            best_intermediate_recall: retention.map(|r| r.best_intermediate_recall),
            best_stage: retention.and_then(|r| r.best_stage).map(|l| l.to_string()),
            best_stage_words: retention.and_then(|r| r.best_stage_words),
        }
    }

    fn key(&self) -> (String, Strategy) {
        (self.backend.clone(), self.strategy)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunResults {
    rows: Vec<ResultRow>,
}

impl RunResults {
    pub fn new(rows: Vec<ResultRow>) -> Result<Self, ReportError> {
        let mut seen = BTreeSet::new();
        for r in &rows {
            if !seen.insert((r.example_id.as_str(), r.strategy, r.backend.as_str())) {
                return Err(ReportError::DuplicateRow {
                    example_id: r.example_id.clone(),
                    strategy: r.strategy,
                    backend: r.backend.clone(),
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, ReportError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let rows = rdr.deserialize().collect::<Result<Vec<ResultRow>, _>>()?;
        Self::new(rows)
    }

    pub fn read_csv(path: &Path) -> Result<Self, ReportError> {
        let file = fs::File::open(path).map_err(io_err(path))?;
        Self::from_csv_reader(file)
    }

    pub fn to_csv_string(&self) -> Result<String, ReportError> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            wtr.serialize(row)?;
        }
        let bytes = wtr.into_inner().map_err(|e| e.into_error()).map_err(io_err(Path::new("<buffer>")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ReportError> {
        fs::write(path, self.to_csv_string()?).map_err(io_err(path))
    }

    /// Rows grouped by `(backend, strategy)`.
    fn groups(&self) -> BTreeMap<(String, Strategy), Vec<&ResultRow>> {
        let mut groups: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for row in &self.rows {
            groups.entry(row.key()).or_default().push(row);
        }
        groups
    }
}

/// A per-row numeric column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Rouge1,
    Rouge2,
    RougeL,
    RougeLsum,
    AcuRecall,
    FinalRecall,
    BestIntermediateRecall,
    SummaryWords,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::Rouge1,
        Metric::Rouge2,
        Metric::RougeL,
        Metric::RougeLsum,
        Metric::AcuRecall,
        Metric::FinalRecall,
        Metric::BestIntermediateRecall,
        Metric::SummaryWords,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Rouge1 => "rouge1",
            Metric::Rouge2 => "rouge2",
            Metric::RougeL => "rougeL",
            Metric::RougeLsum => "rougeLsum",
            Metric::AcuRecall => "acu_recall",
            Metric::FinalRecall => "final_recall",
            Metric::BestIntermediateRecall => "best_intermediate_recall",
            Metric::SummaryWords => "summary_words",
        }
    }

    /// ROUGE selectors read F1.
    pub fn value(self, row: &ResultRow) -> Option<f64> {
        match self {
            Metric::Rouge1 => Some(row.rouge1_f1),
            Metric::Rouge2 => Some(row.rouge2_f1),
            Metric::RougeL => Some(row.rouge_l_f1),
            Metric::RougeLsum => Some(row.rouge_lsum_f1),
            Metric::AcuRecall => row.acu_recall,
            Metric::FinalRecall => row.final_recall,
            Metric::BestIntermediateRecall => row.best_intermediate_recall,
            Metric::SummaryWords => Some(row.summary_words as f64),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaCell {
    /// Absolute mean of the full-context rows.
    Baseline(f64),
    /// Rounded percent change against the baseline.
    Percent(i64),
}

impl fmt::Display for DeltaCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaCell::Baseline(m) => write!(f, "{m:.4}"),
            DeltaCell::Percent(p) if *p > 0 => write!(f, "+{p}%"),
            DeltaCell::Percent(p) => write!(f, "{p}%"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRow {
    pub backend: String,
    pub strategy: Strategy,
    pub mean: f64,
    pub cell: DeltaCell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTable {
    pub metric: String,
    pub rows: Vec<DeltaRow>,
}

/// Percent change of `method` over `baseline`, rounded half away from zero.
pub fn relative_delta(method: f64, baseline: f64) -> i64 {
    ((method - baseline) / baseline * 100.0).round() as i64
}

impl DeltaTable {
    /// Builds the table from `(backend, strategy, value)` observations.
    /// Groups are averaged first, then compared with the backend's
    /// full-context mean.
    pub fn from_observations<'a, I>(metric: impl Into<String>, observations: I) -> Result<Self, ReportError>
    where
        I: IntoIterator<Item = (&'a str, Strategy, f64)>,
    {
        let mut values: BTreeMap<(String, Strategy), Vec<f64>> = BTreeMap::new();
        for (backend, strategy, v) in observations {
            values.entry((backend.to_string(), strategy)).or_default().push(v);
        }
        let means: BTreeMap<(String, Strategy), f64> = values
            .into_iter()
            .filter_map(|(k, v)| mean(&v).map(|m| (k, m)))
            .collect();

        let mut rows = Vec::with_capacity(means.len());
        for ((backend, strategy), &m) in &means {
            let baseline = *means
                .get(&(backend.clone(), Strategy::FullContext))
                .ok_or_else(|| ReportError::MissingBaseline(backend.clone()))?;
            let cell = if *strategy == Strategy::FullContext {
                DeltaCell::Baseline(m)
            } else if baseline == 0.0 {
                return Err(ReportError::ZeroBaseline(backend.clone()));
            } else {
                DeltaCell::Percent(relative_delta(m, baseline))
            };
            rows.push(DeltaRow {
                backend: backend.clone(),
                strategy: *strategy,
                mean: m,
                cell,
            });
        }
        Ok(Self {
            metric: metric.into(),
            rows,
        })
    }

    pub fn cell(&self, backend: &str, strategy: Strategy) -> Option<DeltaCell> {
        self.rows
            .iter()
            .find(|r| r.backend == backend && r.strategy == strategy)
            .map(|r| r.cell)
    }

    pub fn render(&self) -> String {
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| vec![r.backend.clone(), r.strategy.to_string(), r.cell.to_string()])
            .collect();
        render_table(&["backend", "strategy", &self.metric], &body)
    }
}

/// Mean of `metric` per `(backend, strategy)` against the backend's
/// full-context mean. Rows without a value for `metric` are skipped.
pub fn relative_delta_table(results: &RunResults, metric: Metric) -> Result<DeltaTable, ReportError> {
    DeltaTable::from_observations(
        metric.as_str(),
        results
            .rows()
            .iter()
            .filter_map(|r| metric.value(r).map(|v| (r.backend.as_str(), r.strategy, v))),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetentionRow {
    pub backend: String,
    pub strategy: Strategy,
    pub examples: usize,
    pub mean_final_recall: f64,
    /// Absent for full-context runs, which have no intermediate output.
    pub mean_best_intermediate_recall: Option<f64>,
}

pub fn retention_series(results: &RunResults) -> Vec<RetentionRow> {
    results
        .groups()
        .into_iter()
        .filter_map(|((backend, strategy), rows)| {
            let pairs: Vec<(f64, f64)> = rows
                .iter()
                .filter_map(|r| Some((r.final_recall?, r.best_intermediate_recall?)))
                .collect();
            let finals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let bests: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            Some(RetentionRow {
                backend,
                strategy,
                examples: pairs.len(),
                mean_final_recall: mean(&finals)?,
                mean_best_intermediate_recall: if strategy == Strategy::FullContext {
                    None
                } else {
                    mean(&bests)
                },
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthRow {
    pub backend: String,
    pub strategy: Strategy,
    pub final_words: i64,
    /// Mean length of the best intermediate output, when there is one.
    pub best_words: Option<i64>,
}

pub fn length_table(results: &RunResults) -> Vec<LengthRow> {
    results
        .groups()
        .into_iter()
        .map(|((backend, strategy), rows)| {
            let finals: Vec<f64> = rows.iter().map(|r| r.summary_words as f64).collect();
            let bests: Vec<f64> = rows
                .iter()
                .filter_map(|r| r.best_stage_words.map(|w| w as f64))
                .collect();
            LengthRow {
                backend,
                strategy,
                final_words: mean(&finals).map_or(0, |m| m.round() as i64),
                best_words: mean(&bests).map(|m| m.round() as i64),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionRow {
    pub backend: String,
    pub strategy: Strategy,
    pub examples: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

/// Linear-interpolated quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Five-number summary of per-example scores per `(backend, strategy)`.
pub fn score_distribution(results: &RunResults, metric: Metric) -> Vec<DistributionRow> {
    results
        .groups()
        .into_iter()
        .filter_map(|((backend, strategy), rows)| {
            let mut v: Vec<f64> = rows.iter().filter_map(|r| metric.value(r)).collect();
            v.sort_by(f64::total_cmp);
            Some(DistributionRow {
                backend,
                strategy,
                examples: v.len(),
                mean: mean(&v)?,
                min: v[0],
                q1: quantile(&v, 0.25),
                median: quantile(&v, 0.5),
                q3: quantile(&v, 0.75),
                max: v[v.len() - 1],
            })
        })
        .collect()
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, ReportError> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for row in rows {
        wtr.serialize(row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| e.into_error()).map_err(io_err(Path::new("<buffer>")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Left-aligned plain-text table with a dashed rule under the header.
pub fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| -> String {
        let padded: Vec<String> = cells
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(&mut headers.iter().copied());
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out += &(rule.join("  ") + "\n");
    for row in rows {
        out += &line(&mut row.iter().map(String::as_str));
    }
    out
}

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

pub fn render_retention(rows: &[RetentionRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.backend.clone(),
                r.strategy.to_string(),
                r.examples.to_string(),
                format!("{:.4}", r.mean_final_recall),
                opt(r.mean_best_intermediate_recall.map(|b| format!("{b:.4}"))),
            ]
        })
        .collect();
    render_table(&["backend", "strategy", "n", "final", "best_intermediate"], &body)
}

pub fn render_lengths(rows: &[LengthRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.backend.clone(),
                r.strategy.to_string(),
                r.final_words.to_string(),
                opt(r.best_words),
            ]
        })
        .collect();
    render_table(&["backend", "strategy", "final_words", "best_words"], &body)
}

pub fn render_distribution(rows: &[DistributionRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.backend.clone(), r.strategy.to_string(), r.examples.to_string()];
            cells.extend([r.min, r.q1, r.median, r.q3, r.max, r.mean].map(|x| format!("{x:.4}")));
            cells
        })
        .collect();
    render_table(
        &["backend", "strategy", "n", "min", "q1", "median", "q3", "max", "mean"],
        &body,
    )
}

/// Writes every table as text and CSV into `dir`. Returns the combined
/// text rendering.
pub fn write_reports(results: &RunResults, metric: Metric, dir: &Path) -> Result<String, ReportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut text = String::new();

    match relative_delta_table(results, metric) {
        Ok(table) => {
            let csv_rows: Vec<(String, String, f64, String)> = table
                .rows
                .iter()
                .map(|r| (r.backend.clone(), r.strategy.to_string(), r.mean, r.cell.to_string()))
                .collect();
            let mut wtr = csv::Writer::from_writer(Vec::new());
            wtr.write_record(["backend", "strategy", "mean", "cell"])?;
            for row in &csv_rows {
                wtr.serialize(row)?;
            }
            let bytes = wtr.into_inner().map_err(|e| e.into_error()).map_err(io_err(dir))?;
            write_file(&dir.join("relative_delta.csv"), &bytes)?;
            text += &format!("Relative delta vs full_context ({metric})\n{}\n", table.render());
        }
        Err(ReportError::MissingBaseline(b)) => {
            log::warn!("skipping relative delta table: backend `{b}` has no full_context rows");
        }
        Err(e) => return Err(e),
    }

    let retention = retention_series(results);
    write_file(&dir.join("retention.csv"), to_csv(&retention)?.as_bytes())?;
    text += &format!("Retention (best intermediate vs final recall)\n{}\n", render_retention(&retention));

    let lengths = length_table(results);
    write_file(&dir.join("lengths.csv"), to_csv(&lengths)?.as_bytes())?;
    text += &format!("Summary length (words)\n{}\n", render_lengths(&lengths));

    let dist = score_distribution(results, metric);
    write_file(&dir.join("distribution.csv"), to_csv(&dist)?.as_bytes())?;
    text += &format!("Per-example {metric} distribution\n{}", render_distribution(&dist));

    write_file(&dir.join("report.txt"), text.as_bytes())?;
    Ok(text)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(example: &str, strategy: Strategy, backend: &str, f1: f64) -> ResultRow {
        let prf = Prf::new(f1, f1);
        let scores = EvalScores {
            rouge1: prf,
            rouge2: prf,
            rouge_l: prf,
            rouge_lsum: prf,
            acu_recall: Some(f1),
            summary_words: 40,
        };
        ResultRow::new(example, strategy, backend, &scores, None)
    }

    fn with_retention(mut r: ResultRow, fin: f64, best: f64, words: Option<usize>) -> ResultRow {
        r.retention_metric = Some(RecallMetric::Acu);
        r.final_recall = Some(fin);
        r.best_intermediate_recall = Some(best);
        r.best_stage_words = words;
        r
    }

    #[test]
    fn deltas_from_published_means() {
        let t = DeltaTable::from_observations(
            "acu",
            [
                ("llama", Strategy::FullContext, 33.9),
                ("llama", Strategy::Retrieval, 35.3),
                ("llama", Strategy::Hierarchical, 16.0),
                ("llama", Strategy::Incremental, 33.9),
            ],
        )
        .unwrap();
        assert_eq!(t.cell("llama", Strategy::Retrieval), Some(DeltaCell::Percent(4)));
        assert_eq!(t.cell("llama", Strategy::Hierarchical), Some(DeltaCell::Percent(-53)));
        assert_eq!(t.cell("llama", Strategy::Incremental), Some(DeltaCell::Percent(0)));
        assert_eq!(t.cell("llama", Strategy::FullContext), Some(DeltaCell::Baseline(33.9)));
        assert_eq!(DeltaCell::Percent(4).to_string(), "+4%");
        assert_eq!(DeltaCell::Percent(-53).to_string(), "-53%");
    }

    #[test]
    fn missing_baseline_is_an_error() {
        let err = DeltaTable::from_observations("m", [("b", Strategy::Retrieval, 1.0)]).unwrap_err();
        assert!(matches!(err, ReportError::MissingBaseline(b) if b == "b"));
    }

    #[test]
    fn duplicate_rows_rejected() {
        let r = row("e1", Strategy::Incremental, "m", 0.5);
        assert!(matches!(
            RunResults::new(vec![r.clone(), r]),
            Err(ReportError::DuplicateRow { .. })
        ));
    }

    #[test]
    fn delta_table_macro_averages_rows() {
        let results = RunResults::new(vec![
            row("e1", Strategy::FullContext, "m", 0.2),
            row("e2", Strategy::FullContext, "m", 0.4),
            row("e1", Strategy::Retrieval, "m", 0.3),
            row("e2", Strategy::Retrieval, "m", 0.6),
        ])
        .unwrap();
        let t = relative_delta_table(&results, Metric::Rouge1).unwrap();
        assert_eq!(t.cell("m", Strategy::Retrieval), Some(DeltaCell::Percent(50)));
        let rendered = t.render();
        assert!(rendered.starts_with("backend  strategy      rouge1\n"), "{rendered}");
    }

    #[test]
    fn retention_means() {
        let results = RunResults::new(vec![
            with_retention(row("e1", Strategy::Hierarchical, "m", 0.1), 0.25, 1.0, Some(10)),
            with_retention(row("e2", Strategy::Hierarchical, "m", 0.1), 0.75, 0.5, Some(20)),
            with_retention(row("e1", Strategy::FullContext, "m", 0.1), 0.5, 0.0, None),
            row("e1", Strategy::Retrieval, "m", 0.1),
        ])
        .unwrap();
        let series = retention_series(&results);
        assert_eq!(series.len(), 2);
        assert_eq!(series[0].strategy, Strategy::FullContext);
        assert_eq!(series[0].mean_best_intermediate_recall, None);
        assert_eq!(series[1].mean_final_recall, 0.5);
        assert_eq!(series[1].mean_best_intermediate_recall, Some(0.75));
        let lengths = length_table(&results);
        let h = lengths.iter().find(|l| l.strategy == Strategy::Hierarchical).unwrap();
        assert_eq!((h.final_words, h.best_words), (40, Some(15)));
    }

    #[test]
    fn length_means_round() {
        let mut a = row("e1", Strategy::Incremental, "m", 0.1);
        let mut b = row("e2", Strategy::Incremental, "m", 0.1);
        a.summary_words = 40;
        b.summary_words = 48;
        let t = length_table(&RunResults::new(vec![a, b]).unwrap());
        assert_eq!(t[0].final_words, 44);
    }

    #[test]
    fn csv_round_trip() {
        let results = RunResults::new(vec![
            with_retention(row("e1", Strategy::Hierarchical, "m", 0.125), 0.25, 1.0, Some(10)),
            row("e2", Strategy::Retrieval, "m", 1.0 / 3.0),
        ])
        .unwrap();
        let csv = results.to_csv_string().unwrap();
        let back = RunResults::from_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(back, results);
        assert_eq!(back.to_csv_string().unwrap(), csv);
    }

    #[test]
    fn quartiles() {
        let results = RunResults::new(
            (0..5)
                .map(|i| row(&format!("e{i}"), Strategy::Retrieval, "m", i as f64 / 4.0))
                .collect(),
        )
        .unwrap();
        let d = score_distribution(&results, Metric::Rouge1);
        assert_eq!((d[0].min, d[0].q1, d[0].median, d[0].q3, d[0].max), (0.0, 0.25, 0.5, 0.75, 1.0));
    }

    #[test]
    fn metric_names_parse() {
        for m in Metric::ALL {
            assert_eq!(m.as_str().parse::<Metric>().unwrap(), m);
        }
        assert_eq!("ROUGEL".parse::<Metric>().unwrap(), Metric::RougeL);
        assert!("bleu".parse::<Metric>().is_err());
    }
}
