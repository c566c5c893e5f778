//! Client for chat-completions compatible endpoints.

use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

use super::{BackendConfig, BackendError, SummarizeRequest, Summarizer};
use crate::net::{endpoint, resolve_api_key, HttpError, JsonPoster};

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatCompletionRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: usize,
}

/// Sends the rendered prompt as a single user message. Chat templates are
/// left to the server.
#[derive(Debug)]
pub struct HttpChatClient {
    name: String,
    url: String,
    model: String,
    poster: JsonPoster,
}

impl From<HttpError> for BackendError {
    fn from(e: HttpError) -> Self {
        match e {
            HttpError::Transport { attempts, message } => BackendError::Transport { attempts, message },
            HttpError::Status { status, body } => BackendError::Status { status, body },
            HttpError::Malformed(m) => BackendError::Malformed(m),
            HttpError::Config(m) => BackendError::Config(m),
        }
    }
}

impl HttpChatClient {
    pub fn from_config(cfg: &BackendConfig) -> Result<Self, BackendError> {
        cfg.validate()?;
        let base = cfg.base_url.as_deref().unwrap_or_default();
        let model = cfg.model_name.clone().unwrap_or_default();
        let api_key = resolve_api_key(cfg.api_key_env.as_deref())?;
        let poster = JsonPoster::new(
            cfg.timeout(),
            api_key,
            cfg.max_retries,
            Duration::from_millis(cfg.retry_backoff_ms),
            cfg.max_in_flight,
        )?;
        Ok(Self {
            name: cfg.display_name(),
            url: endpoint(base, "chat/completions"),
            model,
            poster,
        })
    }
}

impl Summarizer for HttpChatClient {
    fn name(&self) -> &str {
        &self.name
    }

    fn summarize(&self, req: &SummarizeRequest) -> Result<String, BackendError> {
        let prompt = req.prompt();
        let body = ChatCompletionRequest {
            model: &self.model,
            messages: vec![ChatMessage {
                role: "user",
                content: &prompt,
            }],
            temperature: req.temperature,
            max_tokens: req.max_tokens,
        };
        let response = self.poster.post(&self.url, &body)?;
        let content = response
            .pointer("/choices/0/message/content")
            .ok_or_else(|| BackendError::Malformed(format!("no choices[0].message.content in {response}")))?;
        match content {
            Value::String(text) if !text.trim().is_empty() => Ok(text.clone()),
            Value::String(_) | Value::Null => Err(BackendError::EmptyCompletion),
            other => Err(BackendError::Malformed(format!("content is not a string: {other}"))),
        }
    }
}
