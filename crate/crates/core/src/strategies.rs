//! The four summarization pipelines.
//!
//! Each run yields a [`SummaryTrace`] holding every intermediate output in
//! production order. Stages are assembled by label, never by completion
//! time, so traces are reproducible even when calls run concurrently.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, SummarizeRequest, Summarizer};
use crate::budget::{BudgetConfig, BudgetedExample};
use crate::retrieval::{rank_documents, select_order_preserving, Embedder, RetrievalError};
use crate::tokenizer::Tokenizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    FullContext,
    Hierarchical,
    Incremental,
    Retrieval,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::FullContext,
        Strategy::Hierarchical,
        Strategy::Incremental,
        Strategy::Retrieval,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::FullContext => "full_context",
            Strategy::Hierarchical => "hierarchical",
            Strategy::Incremental => "incremental",
            Strategy::Retrieval => "retrieval",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    DocSummary,
    Merge,
    Running,
    RetrievedBlock,
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StageLabel {
    pub kind: StageKind,
    pub level: usize,
    pub index: usize,
}

impl StageLabel {
    pub fn new(kind: StageKind, level: usize, index: usize) -> Self {
        Self { kind, level, index }
    }
}

impl fmt::Display for StageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = serde_json::to_value(self.kind).expect("stage kinds serialize");
        write!(f, "{}:{}:{}", kind.as_str().unwrap_or("?"), self.level, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutput {
    #[serde(rename = "stage_label")]
    pub label: StageLabel,
    pub text: String,
    pub token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTrace {
    pub strategy: Strategy,
    #[serde(default)]
    pub backend: String,
    pub example_id: String,
    pub stages: Vec<StageOutput>,
    #[serde(rename = "final")]
    pub final_summary: String,
}

impl SummaryTrace {
    fn new(strategy: Strategy, backend: &str, example_id: &str) -> Self {
        Self {
            strategy,
            backend: backend.to_string(),
            example_id: example_id.to_string(),
            stages: Vec::new(),
            final_summary: String::new(),
        }
    }

    /// Stages that correspond to a summarizer call.
    pub fn call_count(&self) -> usize {
        self.stages
            .iter()
            .filter(|s| s.label.kind != StageKind::RetrievedBlock)
            .count()
    }

    pub fn final_stage(&self) -> Option<&StageOutput> {
        self.stages.iter().find(|s| s.label.kind == StageKind::Final)
    }
}

#[derive(Debug, Error)]
pub enum StrategyFailure {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("retrieval strategy needs an embedder")]
    MissingEmbedder,
}

/// A failed run, carrying every stage finished before the failure.
#[derive(Debug, Error)]
#[error("{strategy} failed on example `{example_id}`: {source}")]
pub struct StrategyError {
    pub example_id: String,
    pub strategy: Strategy,
    pub partial: Box<SummaryTrace>,
    #[source]
    pub source: StrategyFailure,
}

/// Greedily packs consecutive texts into chunks of at most `chunk_tokens`,
/// counting one joiner token between neighbours.
pub fn pack_chunks<S: AsRef<str>>(
    texts: &[S],
    chunk_tokens: usize,
    tok: &dyn Tokenizer,
) -> Vec<Vec<String>> {
    let mut chunks: Vec<Vec<String>> = Vec::new();
    let mut current: Vec<String> = Vec::new();
    let mut used = 0usize;
    for text in texts {
        let text = text.as_ref();
        let len = tok.count_tokens(text);
        if !current.is_empty() && used + 1 + len > chunk_tokens {
            chunks.push(std::mem::take(&mut current));
            used = 0;
        }
        used += if current.is_empty() { len } else { len + 1 };
        current.push(text.to_string());
    }
    if !current.is_empty() {
        chunks.push(current);
    }
    chunks
}

/// Everything a strategy run needs besides the example.
pub struct Pipeline<'a> {
    pub summarizer: &'a dyn Summarizer,
    pub tokenizer: &'a dyn Tokenizer,
    pub budget: &'a BudgetConfig,
    pub num_words: usize,
    pub embedder: Option<&'a dyn Embedder>,
}

struct Run<'p, 'a> {
    pipeline: &'p Pipeline<'a>,
    question: &'p str,
    trace: SummaryTrace,
}

impl<'p, 'a> Run<'p, 'a> {
    fn request<S: AsRef<str>>(&self, docs: &[S]) -> SummarizeRequest {
        let p = self.pipeline;
        SummarizeRequest::new(docs, self.question, p.num_words, p.budget.temperature, p.tokenizer)
    }

    fn call<S: AsRef<str>>(&self, docs: &[S]) -> Result<String, BackendError> {
        self.pipeline.summarizer.summarize(&self.request(docs))
    }

    fn record(&mut self, label: StageLabel, text: String) {
        let token_count = self.pipeline.tokenizer.count_tokens(&text);
        if label.kind == StageKind::Final {
            self.trace.final_summary = text.clone();
        }
        self.trace.stages.push(StageOutput {
            label,
            text,
            token_count,
        });
    }

    fn fail(self, source: impl Into<StrategyFailure>) -> StrategyError {
        StrategyError {
            example_id: self.trace.example_id.clone(),
            strategy: self.trace.strategy,
            partial: Box::new(self.trace),
            source: source.into(),
        }
    }

    /// Runs `inputs` concurrently and records outputs in index order up to
    /// the first failure.
    fn call_level(
        &mut self,
        inputs: &[Vec<String>],
        label: impl Fn(usize) -> StageLabel,
    ) -> Result<Vec<String>, BackendError> {
        let results: Vec<Result<String, BackendError>> =
            inputs.par_iter().map(|docs| self.call(docs)).collect();
        let mut outputs = Vec::with_capacity(results.len());
        for (i, result) in results.into_iter().enumerate() {
            let text = result?;
            self.record(label(i), text.clone());
            outputs.push(text);
        }
        Ok(outputs)
    }
}

impl<'a> Pipeline<'a> {
    fn start<'p>(&'p self, strategy: Strategy, ex: &'p BudgetedExample) -> Run<'p, 'a> {
        Run {
            pipeline: self,
            question: ex.example.question(),
            trace: SummaryTrace::new(strategy, self.summarizer.name(), &ex.example.id),
        }
    }

    pub fn run(&self, strategy: Strategy, ex: &BudgetedExample) -> Result<SummaryTrace, StrategyError> {
        match strategy {
            Strategy::FullContext => self.run_full_context(ex),
            Strategy::Hierarchical => self.run_hierarchical(ex),
            Strategy::Incremental => self.run_incremental(ex),
            Strategy::Retrieval => self.run_retrieval(ex),
        }
    }

    /// One call over every retained document.
    pub fn run_full_context(&self, ex: &BudgetedExample) -> Result<SummaryTrace, StrategyError> {
        let mut run = self.start(Strategy::FullContext, ex);
        let docs: Vec<&str> = ex.example.documents.iter().map(|d| d.text.as_str()).collect();
        match run.call(&docs) {
            Ok(text) => {
                run.record(StageLabel::new(StageKind::Final, 0, 0), text);
                Ok(run.trace)
            }
            Err(e) => Err(run.fail(e)),
        }
    }

    /// Summarizes each document, then repeatedly packs the previous level's
    /// summaries into chunks and summarizes each chunk until one remains.
    pub fn run_hierarchical(&self, ex: &BudgetedExample) -> Result<SummaryTrace, StrategyError> {
        let chunk = self.budget.chunk_tokens;
        let tok = self.tokenizer;
        let mut run = self.start(Strategy::Hierarchical, ex);
        let docs = &ex.example.documents;

        if docs.len() == 1 {
            let input = tok.truncate_tokens(&docs[0].text, chunk);
            return match run.call(&[input]) {
                Ok(text) => {
                    run.record(StageLabel::new(StageKind::Final, 0, 0), text);
                    Ok(run.trace)
                }
                Err(e) => Err(run.fail(e)),
            };
        }

        let level0: Vec<Vec<String>> = docs
            .iter()
            .map(|d| vec![tok.truncate_tokens(&d.text, chunk).to_string()])
            .collect();
        let mut current = match run.call_level(&level0, |i| StageLabel::new(StageKind::DocSummary, 0, i)) {
            Ok(out) => out,
            Err(e) => return Err(run.fail(e)),
        };

        let mut level = 0;
        loop {
            level += 1;
            let chunks = self.merge_chunks(&current);
            let kind = if chunks.len() == 1 {
                StageKind::Final
            } else {
                StageKind::Merge
            };
            current = match run.call_level(&chunks, |j| StageLabel::new(kind, level, j)) {
                Ok(out) => out,
                Err(e) => return Err(run.fail(e)),
            };
            if kind == StageKind::Final {
                return Ok(run.trace);
            }
        }
    }

    /// Packs summaries for the next merge level. If no two summaries fit in
    /// one chunk, each is cut to half a chunk so that the level still shrinks.
    fn merge_chunks(&self, summaries: &[String]) -> Vec<Vec<String>> {
        let chunk = self.budget.chunk_tokens;
        let tok = self.tokenizer;
        let clamped: Vec<&str> = summaries.iter().map(|s| tok.truncate_tokens(s, chunk)).collect();
        let chunks = pack_chunks(&clamped, chunk, tok);
        if chunks.len() < summaries.len() {
            return chunks;
        }
        let half = chunk.saturating_sub(1) / 2;
        log::warn!("summaries too long to merge pairwise; truncating each to {half} tokens");
        let halves: Vec<&str> = summaries.iter().map(|s| tok.truncate_tokens(s, half)).collect();
        pack_chunks(&halves, chunk, tok)
    }

    /// Keeps a running summary, folding in one document at a time in
    /// dataset order. Each step's input stays within one chunk.
    pub fn run_incremental(&self, ex: &BudgetedExample) -> Result<SummaryTrace, StrategyError> {
        let chunk = self.budget.chunk_tokens;
        let tok = self.tokenizer;
        let mut run = self.start(Strategy::Incremental, ex);
        let docs = &ex.example.documents;
        let last = docs.len() - 1;
        let mut running: Option<String> = None;
        for (i, doc) in docs.iter().enumerate() {
            let inputs: Vec<&str> = match &running {
                None => vec![tok.truncate_tokens(&doc.text, chunk)],
                Some(prev) => {
                    let prev = tok.truncate_tokens(prev, chunk);
                    let room = chunk.saturating_sub(tok.count_tokens(prev) + 1);
                    vec![prev, tok.truncate_tokens(&doc.text, room)]
                }
            };
            let text = match run.call(&inputs) {
                Ok(t) => t,
                Err(e) => return Err(run.fail(e)),
            };
            let kind = if i == last {
                StageKind::Final
            } else {
                StageKind::Running
            };
            run.record(StageLabel::new(kind, 0, i), text.clone());
            running = Some(text);
        }
        Ok(run.trace)
    }

    /// Ranks documents against the question, keeps the best rank prefix that
    /// fits the input cap in dataset order, and summarizes it in one call.
    pub fn run_retrieval(&self, ex: &BudgetedExample) -> Result<SummaryTrace, StrategyError> {
        let tok = self.tokenizer;
        let mut run = self.start(Strategy::Retrieval, ex);
        let Some(embedder) = self.embedder else {
            return Err(run.fail(StrategyFailure::MissingEmbedder));
        };
        let doc_cap = self.budget.retrieval_doc_cap;
        let docs = &ex.example.documents;
        let ranked = match rank_documents(run.question, docs, embedder, tok, doc_cap) {
            Ok(r) => r,
            Err(e) => return Err(run.fail(e)),
        };
        let capped: Vec<_> = docs
            .iter()
            .map(|d| crate::corpus::Document {
                text: tok.truncate_tokens(&d.text, doc_cap).to_string(),
                ..d.clone()
            })
            .collect();
        let selected = match select_order_preserving(&ranked, &capped, self.budget.retrieval_input_cap, tok) {
            Ok(s) => s,
            Err(e) => return Err(run.fail(e)),
        };
        let texts: Vec<&str> = selected.iter().map(|d| d.text.as_str()).collect();
        run.record(StageLabel::new(StageKind::RetrievedBlock, 0, 0), texts.join("\n"));
        match run.call(&texts) {
            Ok(text) => {
                run.record(StageLabel::new(StageKind::Final, 0, 0), text);
                Ok(run.trace)
            }
            Err(e) => Err(run.fail(e)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{MarkerOracle, MockExtractive};
    use crate::corpus::{Document, Example};
    use crate::retrieval::HashedTfIdf;
    use crate::tokenizer::TokenizerHandle;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting<S> {
        inner: S,
        calls: AtomicUsize,
    }

    impl<S: Summarizer> Summarizer for Counting<S> {
        fn name(&self) -> &str {
            self.inner.name()
        }
        fn summarize(&self, req: &SummarizeRequest) -> Result<String, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.summarize(req)
        }
    }

    struct FailAfter(AtomicUsize);

    impl Summarizer for FailAfter {
        fn name(&self) -> &str {
            "flaky"
        }
        fn summarize(&self, req: &SummarizeRequest) -> Result<String, BackendError> {
            if self.0.fetch_sub(1, Ordering::SeqCst) == 0 {
                self.0.store(0, Ordering::SeqCst);
                return Err(BackendError::EmptyCompletion);
            }
            Ok(req.document_block.clone())
        }
    }

    fn example(texts: &[&str]) -> BudgetedExample {
        let ex = Example {
            id: "ex".into(),
            query: None,
            dataset_tag: "t".into(),
            documents: texts
                .iter()
                .enumerate()
                .map(|(i, t)| Document::new(format!("d{i}"), *t))
                .collect(),
            references: vec!["r".into()],
            acus: None,
        };
        BudgetedExample::unbudgeted(ex, &TokenizerHandle::default())
    }

    fn pipeline<'a>(
        s: &'a dyn Summarizer,
        tok: &'a TokenizerHandle,
        budget: &'a BudgetConfig,
        num_words: usize,
        emb: Option<&'a dyn Embedder>,
    ) -> Pipeline<'a> {
        Pipeline {
            summarizer: s,
            tokenizer: tok,
            budget,
            num_words,
            embedder: emb,
        }
    }

    fn labels(t: &SummaryTrace) -> Vec<(StageKind, usize, usize)> {
        t.stages.iter().map(|s| (s.label.kind, s.label.level, s.label.index)).collect()
    }

    #[test]
    fn packs_greedily() {
        let tok = TokenizerHandle::default();
        let s = vec!["w ".repeat(1000); 5];
        let chunks = pack_chunks(&s, 4096, &tok);
        assert_eq!(chunks.iter().map(Vec::len).collect::<Vec<_>>(), [4, 1]);
        assert_eq!(pack_chunks(&["one"], 10, &tok), vec![vec!["one".to_string()]]);
        assert!(pack_chunks::<&str>(&[], 10, &tok).is_empty());
        // 3 + 1 + 3 = 7 fits exactly; the third starts a new chunk.
        let c = pack_chunks(&["a b c", "d e f", "g"], 7, &tok);
        assert_eq!(c.iter().map(Vec::len).collect::<Vec<_>>(), [2, 1]);
    }

    #[test]
    fn full_context_single_call() {
        let tok = TokenizerHandle::default();
        let budget = BudgetConfig::default();
        let m = MockExtractive::new();
        let p = pipeline(&m, &tok, &budget, 3, None);
        let t = p.run_full_context(&example(&["a b", "c d"])).unwrap();
        assert_eq!(t.final_summary, "a b c");
        assert_eq!(labels(&t), [(StageKind::Final, 0, 0)]);
        assert_eq!(t.stages[0].token_count, 3);
    }

    #[test]
    fn hierarchical_single_document() {
        let tok = TokenizerHandle::default();
        let budget = BudgetConfig::default();
        let m = MockExtractive::new();
        let p = pipeline(&m, &tok, &budget, 2, None);
        let t = p.run_hierarchical(&example(&["x y z"])).unwrap();
        assert_eq!(labels(&t), [(StageKind::Final, 0, 0)]);
        assert_eq!(t.final_summary, "x y");
    }

    #[test]
    fn hierarchical_packing_levels() {
        let tok = TokenizerHandle::default();
        let budget = BudgetConfig::default();
        let counting = Counting {
            inner: MockExtractive::new(),
            calls: AtomicUsize::new(0),
        };
        let doc = "w ".repeat(1500);
        let docs = vec![doc.as_str(); 5];
        let p = pipeline(&counting, &tok, &budget, 1000, None);
        let t = p.run_hierarchical(&example(&docs)).unwrap();
        assert_eq!(counting.calls.load(Ordering::SeqCst), 5 + 2 + 1);
        let kinds: Vec<_> = labels(&t);
        assert_eq!(&kinds[5..], &[(StageKind::Merge, 1, 0), (StageKind::Merge, 1, 1), (StageKind::Final, 2, 0)]);
        assert_eq!(t.call_count(), 8);
    }

    #[test]
    fn hierarchical_loses_markers_at_capacity_one() {
        let tok = TokenizerHandle::default();
        let budget = BudgetConfig::default();
        let oracle = MarkerOracle::new(Some(1));
        let p = pipeline(&oracle, &tok, &budget, 10, None);
        let t = p
            .run_hierarchical(&example(&["a <<ACU:1>>", "b <<ACU:2>>", "c <<ACU:3>>", "d <<ACU:4>>"]))
            .unwrap();
        let level0: Vec<_> = t
            .stages
            .iter()
            .filter(|s| s.label.kind == StageKind::DocSummary)
            .map(|s| s.text.as_str())
            .collect();
        assert_eq!(level0, ["<<ACU:1>>", "<<ACU:2>>", "<<ACU:3>>", "<<ACU:4>>"]);
        assert_eq!(t.final_summary, "<<ACU:1>>");
    }

    #[test]
    fn hierarchical_always_shrinks() {
        let tok = TokenizerHandle::default();
        let budget = BudgetConfig {
            chunk_tokens: 200,
            min_doc_tokens: 10,
            ..BudgetConfig::default()
        };
        // Summaries as long as a whole chunk.
        let m = MockExtractive::new();
        let doc = "w ".repeat(500);
        let p = pipeline(&m, &tok, &budget, 200, None);
        let t = p.run_hierarchical(&example(&[doc.as_str(); 4])).unwrap();
        assert_eq!(t.final_stage().unwrap().label.level, 2);
    }

    #[test]
    fn incremental_running_summaries() {
        let tok = TokenizerHandle::default();
        let budget = BudgetConfig::default();
        let oracle = MarkerOracle::new(Some(2));
        let p = pipeline(&oracle, &tok, &budget, 10, None);
        let t = p
            .run_incremental(&example(&["<<ACU:1>>", "<<ACU:2>>", "<<ACU:3>>"]))
            .unwrap();
        let texts: Vec<_> = t.stages.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, ["<<ACU:1>>", "<<ACU:1>> <<ACU:2>>", "<<ACU:1>> <<ACU:2>>"]);
        assert_eq!(
            labels(&t),
            [(StageKind::Running, 0, 0), (StageKind::Running, 0, 1), (StageKind::Final, 0, 2)]
        );
    }

    #[test]
    fn incremental_single_document() {
        let tok = TokenizerHandle::default();
        let budget = BudgetConfig::default();
        let m = MockExtractive::new();
        let p = pipeline(&m, &tok, &budget, 5, None);
        let t = p.run_incremental(&example(&["only doc here"])).unwrap();
        assert_eq!(labels(&t), [(StageKind::Final, 0, 0)]);
    }

    #[test]
    fn retrieval_picks_matching_document() {
        let tok = TokenizerHandle::default();
        let budget = BudgetConfig {
            retrieval_input_cap: 150,
            retrieval_doc_cap: 150,
            min_doc_tokens: 1,
            chunk_tokens: 150,
            ..BudgetConfig::default()
        };
        let filler = |w: &str| format!("{w} ").repeat(100);
        let (a, b, c) = (filler("apple"), filler("volcano eruption"), filler("banana"));
        let mut ex = example(&[&a, &b, &c]);
        ex.example.query = Some("volcano eruption".into());
        let m = MockExtractive::new();
        let emb = HashedTfIdf::new(4096);
        let p = pipeline(&m, &tok, &budget, 5, Some(&emb));
        let t = p.run_retrieval(&ex).unwrap();
        assert_eq!(t.stages[0].label.kind, StageKind::RetrievedBlock);
        assert_eq!(t.stages[0].text, tok.truncate_tokens(&b, 150));
        assert_eq!(t.final_summary, "volcano eruption volcano eruption volcano");
    }

    #[test]
    fn retrieval_without_embedder_fails() {
        let tok = TokenizerHandle::default();
        let budget = BudgetConfig::default();
        let m = MockExtractive::new();
        let p = pipeline(&m, &tok, &budget, 5, None);
        let err = p.run_retrieval(&example(&["a"])).unwrap_err();
        assert!(matches!(err.source, StrategyFailure::MissingEmbedder));
    }

    #[test]
    fn failures_keep_partial_trace() {
        let tok = TokenizerHandle::default();
        let budget = BudgetConfig::default();
        let flaky = FailAfter(AtomicUsize::new(2));
        let p = pipeline(&flaky, &tok, &budget, 5, None);
        let err = p.run_incremental(&example(&["a", "b", "c", "d"])).unwrap_err();
        assert_eq!(err.example_id, "ex");
        assert_eq!(err.partial.stages.len(), 2);
        assert!(matches!(err.source, StrategyFailure::Backend(BackendError::EmptyCompletion)));
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{s}\""));
        }
        assert!("map_reduce".parse::<Strategy>().is_err());
        assert_eq!(StageLabel::new(StageKind::DocSummary, 0, 3).to_string(), "doc_summary:0:3");
    }
}
