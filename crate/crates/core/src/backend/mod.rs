//! Summarizer backends.
//!
//! Every backend receives a [`SummarizeRequest`] whose document block is the
//! input documents joined by a single newline. The HTTP backend wraps the
//! block in the summarization prompt; the mocks operate on the block directly.

mod http;
mod mock;
mod semaphore;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokenizer::Tokenizer;

pub use http::HttpChatClient;
pub use mock::{extract_markers, MarkerOracle, MockExtractive, MARKER_PATTERN};
pub use semaphore::Semaphore;

/// Question used when an example carries no query.
pub const DEFAULT_QUESTION: &str = "Generate a summary of the document";

const INSTRUCTION: &str = "Answer the question based on the provided document. \
Be concise and directly address only the specific question asked.";

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend config: {0}")]
    Config(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("completion was empty")]
    EmptyCompletion,
    #[error("malformed response: {0}")]
    Malformed(String),
}

/// Renders the summarization prompt for a list of documents.
pub fn render_prompt(docs: &[&str], question: &str, num_words: usize) -> String {
    render_block_prompt(&docs.join("\n"), question, num_words)
}

/// Same as [`render_prompt`] for an already joined document block.
pub fn render_block_prompt(block: &str, question: &str, num_words: usize) -> String {
    format!(
        "{block}\n\nQuestion: {question}\n\n{INSTRUCTION} Limit your response to a maximum of {num_words} words."
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeRequest {
    pub document_block: String,
    pub question: String,
    pub num_words: usize,
    pub max_tokens: usize,
    pub temperature: f64,
}

impl SummarizeRequest {
    pub fn new<S: AsRef<str>>(
        docs: &[S],
        question: &str,
        num_words: usize,
        temperature: f64,
        tok: &dyn Tokenizer,
    ) -> Self {
        let parts: Vec<&str> = docs.iter().map(AsRef::as_ref).collect();
        Self {
            document_block: parts.join("\n"),
            question: question.to_string(),
            num_words,
            max_tokens: tok.words_to_tokens(num_words),
            temperature,
        }
    }

    pub fn prompt(&self) -> String {
        render_block_prompt(&self.document_block, &self.question, self.num_words)
    }

    pub fn validate(&self, tok: &dyn Tokenizer) -> Result<(), BackendError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        let expected = tok.words_to_tokens(self.num_words);
        if self.max_tokens != expected {
            return Err(BackendError::InvalidRequest(format!(
                "max_tokens {} does not match {} words (expected {expected})",
                self.max_tokens, self.num_words
            )));
        }
        Ok(())
    }
}

pub trait Summarizer: Send + Sync {
    /// Name used for result rows and trace file names.
    fn name(&self) -> &str;

    fn summarize(&self, req: &SummarizeRequest) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat,
    MockExtractive,
    MockMarkerOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Label for results; defaults to the model name or the mock kind.
    pub name: Option<String>,
    pub base_url: Option<String>,
    pub model_name: Option<String>,
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    /// First retry delay; doubles on every further attempt.
    pub retry_backoff_ms: u64,
    pub max_in_flight: usize,
    /// Marker-oracle capacity; `None` means unlimited.
    pub marker_capacity: Option<usize>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::MockExtractive,
            name: None,
            base_url: None,
            model_name: None,
            api_key_env: None,
            timeout_secs: 600,
            max_retries: 3,
            retry_backoff_ms: 1000,
            max_in_flight: 8,
            marker_capacity: None,
        }
    }
}

impl BackendConfig {
    pub fn mock_extractive() -> Self {
        Self::default()
    }

    pub fn marker_oracle(capacity: Option<usize>) -> Self {
        Self {
            kind: BackendKind::MockMarkerOracle,
            marker_capacity: capacity,
            ..Self::default()
        }
    }

    pub fn http_chat(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::HttpChat,
            base_url: Some(base_url.into()),
            model_name: Some(model.into()),
            ..Self::default()
        }
    }

    pub fn display_name(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        match self.kind {
            BackendKind::HttpChat => self
                .model_name
                .clone()
                .unwrap_or_else(|| "http_chat".into()),
            BackendKind::MockExtractive => "mock_extractive".into(),
            BackendKind::MockMarkerOracle => match self.marker_capacity {
                Some(k) => format!("mock_marker_oracle_k{k}"),
                None => "mock_marker_oracle".into(),
            },
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    /// Checks static invariants. Does not look at the environment.
    pub fn validate(&self) -> Result<(), BackendError> {
        match self.kind {
            BackendKind::HttpChat => {
                if self.base_url.as_deref().is_none_or(str::is_empty) {
                    return Err(BackendError::Config("http_chat requires base_url".into()));
                }
                if self.model_name.as_deref().is_none_or(str::is_empty) {
                    return Err(BackendError::Config("http_chat requires model_name".into()));
                }
                if self.max_in_flight == 0 {
                    return Err(BackendError::Config("max_in_flight must be at least 1".into()));
                }
            }
            BackendKind::MockMarkerOracle => {
                if self.marker_capacity == Some(0) {
                    return Err(BackendError::Config(
                        "marker_capacity must be at least 1".into(),
                    ));
                }
            }
            BackendKind::MockExtractive => {}
        }
        Ok(())
    }

    /// Resolves the config into a live backend. For `http_chat` this reads
    /// the API key from the environment, so a missing key fails here rather
    /// than on the first request.
    pub fn build(&self) -> Result<Box<dyn Summarizer>, BackendError> {
        self.validate()?;
        let name = self.display_name();
        Ok(match self.kind {
            BackendKind::MockExtractive => Box::new(MockExtractive::named(name)),
            BackendKind::MockMarkerOracle => {
                Box::new(MarkerOracle::named(name, self.marker_capacity))
            }
            BackendKind::HttpChat => Box::new(HttpChatClient::from_config(self)?),
        })
    }
}
