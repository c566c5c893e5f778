//! Token accounting used by budgeting, packing and retrieval caps.
//!
//! The default tokenizer treats every whitespace-separated word as one token.
//! Summary length limits are converted from words to tokens with a
//! model-specific word-to-token ratio.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Word-to-token ratio for the Llama-3.1 family.
pub const LLAMA_3_1_RATIO: f64 = 1.145;
/// Word-to-token ratio for Command-R.
pub const COMMAND_R_RATIO: f64 = 1.167;
/// Word-to-token ratio for Jamba-1.5-Mini.
pub const JAMBA_1_5_MINI_RATIO: f64 = 1.219;

pub const WHITESPACE: &str = "whitespace";

#[derive(Debug, Error, PartialEq)]
pub enum TokenizerError {
    #[error("word-to-token ratio must be positive and finite, got {0}")]
    InvalidRatio(f64),
    #[error("unknown tokenizer `{0}`")]
    UnknownTokenizer(String),
}

/// Anything that can count and truncate text in tokens.
///
/// Implementations must be deterministic and `truncate_tokens` must return a
/// prefix of its input.
pub trait Tokenizer: Send + Sync {
    fn count_tokens(&self, text: &str) -> usize;

    fn truncate_tokens<'a>(&self, text: &'a str, n: usize) -> &'a str;

    /// Summary token limit for a word limit: `ceil(words * ratio)`.
    fn words_to_tokens(&self, words: usize) -> usize;
}

/// Named tokenizer with its word-to-token ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenizerHandle {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
}

fn default_name() -> String {
    WHITESPACE.to_string()
}

fn default_ratio() -> f64 {
    1.0
}

impl Default for TokenizerHandle {
    fn default() -> Self {
        Self::whitespace(1.0).expect("unit ratio is valid")
    }
}

impl TokenizerHandle {
    pub fn new(name: impl Into<String>, ratio: f64) -> Result<Self, TokenizerError> {
        let handle = Self {
            name: name.into(),
            ratio,
        };
        handle.validate()?;
        Ok(handle)
    }

    pub fn whitespace(ratio: f64) -> Result<Self, TokenizerError> {
        Self::new(WHITESPACE, ratio)
    }

    /// Whitespace tokenizer carrying the ratio of a known model family.
    pub fn for_model(model: &str) -> Option<Self> {
        let lower = model.to_ascii_lowercase();
        let ratio = if lower.contains("llama") {
            LLAMA_3_1_RATIO
        } else if lower.contains("command-r") || lower.contains("command_r") {
            COMMAND_R_RATIO
        } else if lower.contains("jamba") {
            JAMBA_1_5_MINI_RATIO
        } else {
            return None;
        };
        Some(Self {
            name: WHITESPACE.to_string(),
            ratio,
        })
    }

    pub fn validate(&self) -> Result<(), TokenizerError> {
        if !(self.ratio.is_finite() && self.ratio > 0.0) {
            return Err(TokenizerError::InvalidRatio(self.ratio));
        }
        if self.name != WHITESPACE {
            return Err(TokenizerError::UnknownTokenizer(self.name.clone()));
        }
        Ok(())
    }
}

impl Tokenizer for TokenizerHandle {
    fn count_tokens(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }

    fn truncate_tokens<'a>(&self, text: &'a str, n: usize) -> &'a str {
        if n == 0 {
            return "";
        }
        if self.count_tokens(text) <= n {
            return text;
        }
        let mut seen = 0;
        let mut in_token = false;
        for (i, c) in text.char_indices() {
            if c.is_whitespace() {
                if in_token {
                    seen += 1;
                    if seen == n {
                        return &text[..i];
                    }
                }
                in_token = false;
            } else {
                in_token = true;
            }
        }
        text
    }

    fn words_to_tokens(&self, words: usize) -> usize {
        ceil_product(words, self.ratio)
    }
}

/// `ceil(words * ratio)`, treating products within float noise of an
/// integer as that integer (200 * 1.145 must give 229, not 230).
fn ceil_product(words: usize, ratio: f64) -> usize {
    let exact = words as f64 * ratio;
    let nearest = exact.round();
    if (exact - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        exact.ceil() as usize
    }
}
