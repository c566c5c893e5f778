//! Deterministic summarizers for offline runs and tests.

use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;

use super::{BackendError, SummarizeRequest, Summarizer};

/// Content-unit marker syntax recognised by [`MarkerOracle`].
pub const MARKER_PATTERN: &str = r"<<ACU:[^<>\s]+>>";

fn marker_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(MARKER_PATTERN).expect("marker pattern compiles"))
}

/// Distinct markers in order of first appearance.
pub fn extract_markers(text: &str) -> Vec<&str> {
    let mut seen = HashSet::new();
    marker_regex()
        .find_iter(text)
        .map(|m| m.as_str())
        .filter(|m| seen.insert(*m))
        .collect()
}

/// Returns the first `num_words` whitespace words of the document block.
#[derive(Debug, Clone)]
pub struct MockExtractive {
    name: String,
}

impl MockExtractive {
    pub fn new() -> Self {
        Self::named("mock_extractive")
    }

    pub fn named(name: impl Into<String>) -> Self {
        Self { name: name.into() }
    }
}

impl Default for MockExtractive {
    fn default() -> Self {
        Self::new()
    }
}

impl Summarizer for MockExtractive {
    fn name(&self) -> &str {
        &self.name
    }

    fn summarize(&self, req: &SummarizeRequest) -> Result<String, BackendError> {
        Ok(req
            .document_block
            .split_whitespace()
            .take(req.num_words)
            .collect::<Vec<_>>()
            .join(" "))
    }
}

/// Keeps the first `capacity` distinct markers of the document block, in
/// order of appearance. A perfect but capacity-limited summarizer.
#[derive(Debug, Clone)]
pub struct MarkerOracle {
    name: String,
    capacity: Option<usize>,
}

impl MarkerOracle {
    pub fn new(capacity: Option<usize>) -> Self {
        Self::named("mock_marker_oracle", capacity)
    }

    pub fn named(name: impl Into<String>, capacity: Option<usize>) -> Self {
        Self {
            name: name.into(),
            capacity,
        }
    }
}

impl Summarizer for MarkerOracle {
    fn name(&self) -> &str {
        &self.name
    }

    fn summarize(&self, req: &SummarizeRequest) -> Result<String, BackendError> {
        let markers = extract_markers(&req.document_block);
        let keep = self.capacity.unwrap_or(usize::MAX);
        Ok(markers.into_iter().take(keep).collect::<Vec<_>>().join(" "))
    }
}
