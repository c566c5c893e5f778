//! Reference-based content-selection metrics and retention analysis.
//!
//! ROUGE is computed in full. Atomic-content-unit recall uses a token-overlap
//! proxy: a unit counts as covered when at least `theta` of its distinct
//! tokens appear in the candidate.

mod rouge;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::strategies::{StageKind, StageLabel, SummaryTrace};

pub use rouge::{
    lcs_len, lcs_reference_positions, rouge_l, rouge_lsum, rouge_n, rouge_n_tokens,
    split_sentences,
};

/// Default coverage threshold of the content-unit proxy.
pub const DEFAULT_ACU_THRESHOLD: f64 = 0.7;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("example `{0}` has no reference content units for ACU recall")]
    MissingAcus(String),
    #[error("no reference summaries")]
    NoReferences,
}

/// Lowercases, splits on whitespace, and peels leading and trailing
/// non-alphanumeric characters off each word into single-character tokens.
pub fn word_tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let word = word.to_lowercase();
        let chars: Vec<char> = word.chars().collect();
        let start = chars.iter().position(|c| c.is_alphanumeric());
        let Some(start) = start else {
            out.extend(chars.iter().map(|c| c.to_string()));
            continue;
        };
        let end = chars
            .iter()
            .rposition(|c| c.is_alphanumeric())
            .expect("an alphanumeric char exists")
            + 1;
        out.extend(chars[..start].iter().map(|c| c.to_string()));
        out.push(chars[start..end].iter().collect());
        out.extend(chars[end..].iter().map(|c| c.to_string()));
    }
    out
}

pub fn word_count(text: &str) -> usize {
    word_tokenize(text).len()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
        }
    }

    /// Precision `overlap/candidate`, recall `overlap/reference`; an empty
    /// side scores zero.
    pub fn from_counts(overlap: usize, candidate: usize, reference: usize) -> Self {
        let ratio = |den: usize| if den == 0 { 0.0 } else { overlap as f64 / den as f64 };
        Self::new(ratio(candidate), ratio(reference))
    }
}

fn token_set(text: &str) -> HashSet<String> {
    word_tokenize(text).into_iter().collect()
}

/// Fraction of content units whose distinct tokens are covered by the
/// candidate at rate `theta` or more.
pub fn acu_recall(candidate: &str, acus: &[String], theta: f64) -> f64 {
    if acus.is_empty() {
        return 0.0;
    }
    let cand = token_set(candidate);
    let matched = acus
        .iter()
        .filter(|acu| {
            let unit = token_set(acu);
            !unit.is_empty() && unit.intersection(&cand).count() as f64 / unit.len() as f64 >= theta
        })
        .count();
    matched as f64 / acus.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalScores {
    pub rouge1: Prf,
    pub rouge2: Prf,
    pub rouge_l: Prf,
    pub rouge_lsum: Prf,
    pub acu_recall: Option<f64>,
    pub summary_words: usize,
}

/// Scores against one reference.
pub fn score_pair(candidate: &str, reference: &str) -> [Prf; 4] {
    [
        rouge_n(candidate, reference, 1),
        rouge_n(candidate, reference, 2),
        rouge_l(candidate, reference),
        rouge_lsum(candidate, reference),
    ]
}

fn best_by_f1(scores: impl Iterator<Item = Prf>) -> Prf {
    scores.fold(None, |best: Option<Prf>, s| match best {
        Some(b) if b.f1 >= s.f1 => Some(b),
        _ => Some(s),
    })
    .unwrap_or_default()
}

/// Scores a candidate against several references, keeping for each metric
/// the reference with the highest F1.
pub fn score_text(
    candidate: &str,
    references: &[String],
    acus: Option<&[String]>,
    theta: f64,
) -> Result<EvalScores, EvalError> {
    if references.is_empty() {
        return Err(EvalError::NoReferences);
    }
    let per_ref: Vec<[Prf; 4]> = references.iter().map(|r| score_pair(candidate, r)).collect();
    let metric = |k: usize| best_by_f1(per_ref.iter().map(|s| s[k]));
    Ok(EvalScores {
        rouge1: metric(0),
        rouge2: metric(1),
        rouge_l: metric(2),
        rouge_lsum: metric(3),
        acu_recall: acus.map(|a| acu_recall(candidate, a, theta)),
        summary_words: word_count(candidate),
    })
}

pub fn score_example(
    trace: &SummaryTrace,
    references: &[String],
    acus: Option<&[String]>,
    theta: f64,
) -> Result<EvalScores, EvalError> {
    score_text(&trace.final_summary, references, acus, theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecallMetric {
    Acu,
    Rouge1Recall,
}

impl fmt::Display for RecallMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecallMetric::Acu => "acu",
            RecallMetric::Rouge1Recall => "rouge1_recall",
        })
    }
}

impl FromStr for RecallMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "acu" => Ok(RecallMetric::Acu),
            "rouge1_recall" | "rouge1" => Ok(RecallMetric::Rouge1Recall),
            other => Err(format!("unknown recall metric `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionReport {
    pub metric: RecallMetric,
    pub final_recall: f64,
    /// Best recall over the intermediate outputs; 0 when there is none.
    pub best_intermediate_recall: f64,
    pub best_stage: Option<StageLabel>,
    pub best_stage_words: Option<usize>,
}

/// Recall of the final summary and of the best intermediate output.
pub fn retention_analysis(
    trace: &SummaryTrace,
    references: &[String],
    acus: Option<&[String]>,
    metric: RecallMetric,
    theta: f64,
) -> Result<RetentionReport, EvalError> {
    let recall = |text: &str| -> Result<f64, EvalError> {
        match metric {
            RecallMetric::Acu => {
                let units = acus.ok_or_else(|| EvalError::MissingAcus(trace.example_id.clone()))?;
                Ok(acu_recall(text, units, theta))
            }
            RecallMetric::Rouge1Recall => {
                if references.is_empty() {
                    return Err(EvalError::NoReferences);
                }
                Ok(references
                    .iter()
                    .map(|r| rouge_n(text, r, 1).recall)
                    .fold(0.0, f64::max))
            }
        }
    };

    let final_recall = recall(&trace.final_summary)?;
    let mut best: Option<(f64, &IntermediateOutput)> = None;
    let outputs = intermediate_outputs(trace);
    for output in &outputs {
        let r = recall(&output.text)?;
        if best.is_none_or(|(b, _)| r > b) {
            best = Some((r, output));
        }
    }
    Ok(RetentionReport {
        metric,
        final_recall,
        best_intermediate_recall: best.map_or(0.0, |(r, _)| r),
        best_stage: best.map(|(_, o)| o.label),
        best_stage_words: best.map(|(_, o)| word_count(&o.text)),
    })
}

/// One unit of intermediate output, scored as a whole.
#[derive(Debug, Clone, PartialEq)]
pub struct IntermediateOutput {
    /// Label of the first stage in the unit.
    pub label: StageLabel,
    pub text: String,
}

/// Non-final outputs in production order. The summaries of one
/// hierarchical level are produced side by side and together form the next
/// level's input, so each level is one unit, its texts joined by newlines.
/// Running summaries and retrieved blocks stand alone.
pub fn intermediate_outputs(trace: &SummaryTrace) -> Vec<IntermediateOutput> {
    let mut outputs: Vec<IntermediateOutput> = Vec::new();
    for stage in trace.stages.iter().filter(|s| s.label.kind != StageKind::Final) {
        let joins_level = matches!(stage.label.kind, StageKind::DocSummary | StageKind::Merge);
        match outputs.last_mut() {
            Some(last)
                if joins_level
                    && last.label.kind == stage.label.kind
                    && last.label.level == stage.label.level =>
            {
                last.text.push('\n');
                last.text.push_str(&stage.text);
            }
            _ => outputs.push(IntermediateOutput {
                label: stage.label,
                text: stage.text.clone(),
            }),
        }
    }
    outputs
}

/// Nearest-rank 80th percentile of summary word counts.
pub fn summary_word_limit<S: AsRef<str>>(summaries: &[S]) -> Option<usize> {
    if summaries.is_empty() {
        return None;
    }
    let mut counts: Vec<usize> = summaries.iter().map(|s| word_count(s.as_ref())).collect();
    counts.sort_unstable();
    // ceil(0.8 * n) in integers.
    let rank = (4 * counts.len()).div_ceil(5);
    Some(counts[rank - 1])
}
