//! Input-length normalization shared by every strategy.
//!
//! Documents are truncated longest-first under a global token cap by
//! water-filling: all lengths are clamped to one uniform level, the largest
//! level whose total still fits. A document that would be truncated below the
//! minimum document length is dropped instead and the cap is re-filled over
//! the survivors. Timeline data additionally splits the cap equally across
//! distinct dates before filling within each date.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Example};
use crate::tokenizer::Tokenizer;

#[derive(Debug, Error, PartialEq)]
pub enum BudgetError {
    #[error("invalid budget config: {0}")]
    InvalidConfig(String),
    #[error("example `{example}`: document `{document}` has no date (timeline mode)")]
    MissingTimestamp { example: String, document: String },
    #[error("example `{0}`: no document can receive the minimum document length")]
    AllDocumentsDropped(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    pub max_input_tokens: usize,
    pub min_doc_tokens: usize,
    pub retrieval_doc_cap: usize,
    pub retrieval_input_cap: usize,
    pub chunk_tokens: usize,
    pub temperature: f64,
    pub timeline_mode: bool,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            max_input_tokens: 128_000,
            min_doc_tokens: 128,
            retrieval_doc_cap: 1024,
            retrieval_input_cap: 32_000,
            chunk_tokens: 4096,
            temperature: 0.5,
            timeline_mode: false,
        }
    }
}

impl BudgetConfig {
    pub fn validate(&self) -> Result<(), BudgetError> {
        let bad = |msg: String| Err(BudgetError::InvalidConfig(msg));
        if self.min_doc_tokens > self.retrieval_doc_cap {
            return bad(format!(
                "min_doc_tokens ({}) exceeds retrieval_doc_cap ({})",
                self.min_doc_tokens, self.retrieval_doc_cap
            ));
        }
        if self.retrieval_doc_cap > self.retrieval_input_cap {
            return bad(format!(
                "retrieval_doc_cap ({}) exceeds retrieval_input_cap ({})",
                self.retrieval_doc_cap, self.retrieval_input_cap
            ));
        }
        if self.retrieval_input_cap > self.max_input_tokens {
            return bad(format!(
                "retrieval_input_cap ({}) exceeds max_input_tokens ({})",
                self.retrieval_input_cap, self.max_input_tokens
            ));
        }
        if self.chunk_tokens < self.min_doc_tokens {
            return bad(format!(
                "chunk_tokens ({}) is below min_doc_tokens ({})",
                self.chunk_tokens, self.min_doc_tokens
            ));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad(format!("temperature {} outside [0, 2]", self.temperature));
        }
        Ok(())
    }
}

/// An example after budgeting: retained documents are truncated to their
/// allowance, dropped documents are gone, order is unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetedExample {
    pub example: Example,
    pub dropped_ids: Vec<String>,
    pub per_doc_allowance: BTreeMap<String, usize>,
}

impl BudgetedExample {
    /// Wraps an example without truncating anything.
    pub fn unbudgeted(example: Example, tok: &dyn Tokenizer) -> Self {
        let per_doc_allowance = example
            .documents
            .iter()
            .map(|d| (d.id.clone(), tok.count_tokens(&d.text)))
            .collect();
        Self {
            example,
            dropped_ids: Vec::new(),
            per_doc_allowance,
        }
    }

    pub fn total_tokens(&self) -> usize {
        self.per_doc_allowance.values().sum()
    }
}

/// Clamps every length to the largest level `L` with `sum(min(len, L)) <= cap`.
pub fn water_fill(lengths: &[usize], cap: usize) -> Vec<usize> {
    let level = clamp_level(lengths, cap);
    lengths.iter().map(|&len| len.min(level)).collect()
}

fn clamp_level(lengths: &[usize], cap: usize) -> usize {
    let total: usize = lengths.iter().sum();
    if total <= cap {
        return lengths.iter().copied().max().unwrap_or(0);
    }
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    let mut below = 0usize;
    for (k, &len) in sorted.iter().enumerate() {
        let remaining = sorted.len() - k;
        if below + remaining * len > cap {
            return (cap - below) / remaining;
        }
        below += len;
    }
    unreachable!("total exceeds cap, so some level must overflow")
}

/// Water-fills `lengths` under `cap`, dropping documents truncated below
/// `min(len, min_doc)` one at a time, latest position first. Returns the
/// allowance per input position, `None` for dropped ones.
fn fill_with_drops(lengths: &[usize], cap: usize, min_doc: usize) -> Vec<Option<usize>> {
    let mut alive: Vec<usize> = (0..lengths.len()).collect();
    loop {
        let alive_lengths: Vec<usize> = alive.iter().map(|&i| lengths[i]).collect();
        let filled = water_fill(&alive_lengths, cap);
        let violator = alive
            .iter()
            .zip(&filled)
            .rposition(|(&i, &alloc)| alloc < lengths[i].min(min_doc));
        match violator {
            Some(pos) => {
                alive.remove(pos);
            }
            None => {
                let mut out = vec![None; lengths.len()];
                for (&i, alloc) in alive.iter().zip(filled) {
                    out[i] = Some(alloc);
                }
                return out;
            }
        }
    }
}

fn assemble(
    example: &Example,
    allowances: &[Option<usize>],
    tok: &dyn Tokenizer,
) -> Result<BudgetedExample, BudgetError> {
    let mut documents = Vec::new();
    let mut dropped_ids = Vec::new();
    let mut per_doc_allowance = BTreeMap::new();
    for (doc, allowance) in example.documents.iter().zip(allowances) {
        match allowance {
            Some(n) => {
                documents.push(Document {
                    text: tok.truncate_tokens(&doc.text, *n).to_string(),
                    ..doc.clone()
                });
                per_doc_allowance.insert(doc.id.clone(), *n);
            }
            None => dropped_ids.push(doc.id.clone()),
        }
    }
    if documents.is_empty() {
        return Err(BudgetError::AllDocumentsDropped(example.id.clone()));
    }
    Ok(BudgetedExample {
        example: Example {
            documents,
            ..example.clone()
        },
        dropped_ids,
        per_doc_allowance,
    })
}

/// Global-cap budgeting for non-timeline datasets.
pub fn apply_budget(
    example: &Example,
    cfg: &BudgetConfig,
    tok: &dyn Tokenizer,
) -> Result<BudgetedExample, BudgetError> {
    let lengths: Vec<usize> = example
        .documents
        .iter()
        .map(|d| tok.count_tokens(&d.text))
        .collect();
    let allowances = fill_with_drops(&lengths, cfg.max_input_tokens, cfg.min_doc_tokens);
    assemble(example, &allowances, tok)
}

/// Splits `cap` equally over groups, handing the slack of groups that need
/// less than their share to the others until no group finishes early.
/// Returns the budget per group and the number of rounds taken.
pub fn allocate_equal_shares(demands: &[usize], cap: usize) -> (Vec<usize>, usize) {
    let mut budgets = vec![0; demands.len()];
    let mut active: Vec<usize> = (0..demands.len()).collect();
    let mut remaining = cap;
    let mut rounds = 0;
    while !active.is_empty() {
        rounds += 1;
        let share = remaining / active.len();
        let (satisfied, over): (Vec<usize>, Vec<usize>) =
            active.iter().partition(|&&g| demands[g] <= share);
        if satisfied.is_empty() {
            for g in over {
                budgets[g] = share;
            }
            break;
        }
        for g in satisfied {
            budgets[g] = demands[g];
            remaining -= demands[g];
        }
        active = over;
    }
    (budgets, rounds)
}

/// Timeline budgeting: equal representation for every distinct date.
pub fn apply_timeline_budget(
    example: &Example,
    cfg: &BudgetConfig,
    tok: &dyn Tokenizer,
) -> Result<BudgetedExample, BudgetError> {
    let mut dates = Vec::with_capacity(example.documents.len());
    for doc in &example.documents {
        dates.push(doc.timestamp.ok_or_else(|| BudgetError::MissingTimestamp {
            example: example.id.clone(),
            document: doc.id.clone(),
        })?);
    }
    let lengths: Vec<usize> = example
        .documents
        .iter()
        .map(|d| tok.count_tokens(&d.text))
        .collect();

    let distinct: Vec<NaiveDate> = dates.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let members: Vec<Vec<usize>> = distinct
        .iter()
        .map(|day| (0..dates.len()).filter(|&i| dates[i] == *day).collect())
        .collect();
    let demands: Vec<usize> = members
        .iter()
        .map(|m| m.iter().map(|&i| lengths[i]).sum())
        .collect();
    let (budgets, _) = allocate_equal_shares(&demands, cfg.max_input_tokens);

    let mut allowances = vec![None; lengths.len()];
    for (group, budget) in members.iter().zip(budgets) {
        let group_lengths: Vec<usize> = group.iter().map(|&i| lengths[i]).collect();
        let filled = fill_with_drops(&group_lengths, budget, cfg.min_doc_tokens);
        for (&i, alloc) in group.iter().zip(filled) {
            allowances[i] = alloc;
        }
    }
    assemble(example, &allowances, tok)
}

/// Dispatches on `cfg.timeline_mode`.
pub fn budget_example(
    example: &Example,
    cfg: &BudgetConfig,
    tok: &dyn Tokenizer,
) -> Result<BudgetedExample, BudgetError> {
    if cfg.timeline_mode {
        apply_timeline_budget(example, cfg, tok)
    } else {
        apply_budget(example, cfg, tok)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::TokenizerHandle;

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    fn example_of(lengths: &[usize]) -> Example {
        Example {
            id: "ex".into(),
            query: None,
            dataset_tag: "t".into(),
            documents: lengths
                .iter()
                .enumerate()
                .map(|(i, &n)| Document::new(format!("d{i}"), words(n)))
                .collect(),
            references: vec!["r".into()],
            acus: None,
        }
    }

    fn dated(lengths: &[(u32, usize)]) -> Example {
        let mut ex = example_of(&lengths.iter().map(|x| x.1).collect::<Vec<_>>());
        for (doc, (d, _)) in ex.documents.iter_mut().zip(lengths) {
            doc.timestamp = NaiveDate::from_ymd_opt(2020, 1, *d);
        }
        ex
    }

    fn cfg(cap: usize, min: usize) -> BudgetConfig {
        BudgetConfig {
            max_input_tokens: cap,
            min_doc_tokens: min,
            retrieval_doc_cap: min.max(1),
            retrieval_input_cap: cap,
            chunk_tokens: min.max(1),
            ..BudgetConfig::default()
        }
    }

    fn allowances(b: &BudgetedExample) -> Vec<usize> {
        b.example
            .documents
            .iter()
            .map(|d| b.per_doc_allowance[&d.id])
            .collect()
    }

    #[test]
    fn water_fill_examples() {
        assert_eq!(
            water_fill(&[100_000, 50_000, 30_000], 128_000),
            vec![49_000, 49_000, 30_000]
        );
        assert_eq!(water_fill(&[5, 7, 1], 100), vec![5, 7, 1]);
        assert_eq!(water_fill(&[10, 10, 10], 0), vec![0, 0, 0]);
        assert_eq!(water_fill(&[], 10), Vec::<usize>::new());
        // Level 2 leaves one token unused: level 3 would need 6.
        assert_eq!(water_fill(&[10, 10], 5), vec![2, 2]);
    }

    #[test]
    fn defaults_are_valid() {
        BudgetConfig::default().validate().unwrap();
        let bad = BudgetConfig {
            chunk_tokens: 64,
            ..BudgetConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = BudgetConfig {
            retrieval_input_cap: 200_000,
            ..BudgetConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = BudgetConfig {
            temperature: 2.5,
            ..BudgetConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn budget_identity_when_under_cap() {
        let tok = TokenizerHandle::default();
        let ex = example_of(&[300, 200, 5]);
        let b = apply_budget(&ex, &cfg(1000, 128), &tok).unwrap();
        assert_eq!(b.example, ex);
        assert!(b.dropped_ids.is_empty());
        assert_eq!(allowances(&b), vec![300, 200, 5]);
    }

    #[test]
    fn budget_truncates_longest_first() {
        let tok = TokenizerHandle::default();
        let ex = example_of(&[100_000, 50_000, 30_000]);
        let b = apply_budget(&ex, &BudgetConfig::default(), &tok).unwrap();
        assert_eq!(allowances(&b), vec![49_000, 49_000, 30_000]);
        assert_eq!(tok.count_tokens(&b.example.documents[0].text), 49_000);
        assert!(ex.documents[0].text.starts_with(&b.example.documents[0].text));
    }

    #[test]
    fn budget_drops_latest_violator() {
        let tok = TokenizerHandle::default();
        let ex = example_of(&[300, 300]);
        let b = apply_budget(&ex, &cfg(200, 128), &tok).unwrap();
        assert_eq!(b.dropped_ids, vec!["d1".to_string()]);
        assert_eq!(allowances(&b), vec![200]);
    }

    #[test]
    fn budget_all_dropped() {
        let tok = TokenizerHandle::default();
        let ex = example_of(&[300, 300]);
        assert_eq!(
            apply_budget(&ex, &cfg(100, 128), &tok),
            Err(BudgetError::AllDocumentsDropped("ex".into()))
        );
    }

    #[test]
    fn equal_shares_fixpoint() {
        assert_eq!(allocate_equal_shares(&[900, 100], 1000).0, vec![900, 100]);
        assert_eq!(allocate_equal_shares(&[600, 300, 300], 900).0, vec![300, 300, 300]);
        assert_eq!(allocate_equal_shares(&[50, 50], 1000), (vec![50, 50], 1));
        assert_eq!(allocate_equal_shares(&[], 1000), (vec![], 0));
    }

    #[test]
    fn timeline_identity_under_share() {
        let tok = TokenizerHandle::default();
        let ex = dated(&[(1, 100), (2, 150)]);
        let b = apply_timeline_budget(&ex, &cfg(1000, 10), &tok).unwrap();
        assert_eq!(b.example, ex);
    }

    #[test]
    fn timeline_reassigns_leftover() {
        let tok = TokenizerHandle::default();
        // Date A holds 900 tokens over three docs, date B 100.
        let ex = dated(&[(1, 300), (2, 100), (1, 300), (1, 300)]);
        let b = apply_timeline_budget(&ex, &cfg(1000, 10), &tok).unwrap();
        assert_eq!(allowances(&b), vec![300, 100, 300, 300]);
    }

    #[test]
    fn timeline_equal_shares() {
        let tok = TokenizerHandle::default();
        let ex = dated(&[(1, 400), (1, 200), (2, 300), (3, 300)]);
        let b = apply_timeline_budget(&ex, &cfg(900, 10), &tok).unwrap();
        // Date 1 gets 300, water-filled to [150, 150].
        assert_eq!(allowances(&b), vec![150, 150, 300, 300]);
    }

    #[test]
    fn timeline_requires_dates() {
        let tok = TokenizerHandle::default();
        let ex = example_of(&[10]);
        assert!(matches!(
            apply_timeline_budget(&ex, &cfg(100, 1), &tok),
            Err(BudgetError::MissingTimestamp { .. })
        ));
    }
}
