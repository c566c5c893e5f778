//! JSON-over-HTTP POST with bounded retries, shared by the chat and
//! embedding clients.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Serialize;
use thiserror::Error;

use crate::backend::Semaphore;

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("{0}")]
    Config(String),
}

#[derive(Debug)]
pub struct JsonPoster {
    client: Client,
    api_key: Option<String>,
    max_retries: u32,
    backoff: Duration,
    in_flight: Semaphore,
}

/// Reads the API key named by `env_var`, if one is configured.
pub fn resolve_api_key(env_var: Option<&str>) -> Result<Option<String>, HttpError> {
    match env_var {
        None => Ok(None),
        Some(var) => match std::env::var(var) {
            Ok(key) if !key.is_empty() => Ok(Some(key)),
            _ => Err(HttpError::Config(format!(
                "API key environment variable `{var}` is not set"
            ))),
        },
    }
}

fn retryable(status: StatusCode) -> bool {
    status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error()
}

impl JsonPoster {
    pub fn new(
        timeout: Duration,
        api_key: Option<String>,
        max_retries: u32,
        backoff: Duration,
        max_in_flight: usize,
    ) -> Result<Self, HttpError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| HttpError::Config(format!("cannot build HTTP client: {e}")))?;
        Ok(Self {
            client,
            api_key,
            max_retries,
            backoff,
            in_flight: Semaphore::new(max_in_flight.max(1)),
        })
    }

    /// POSTs `body`, retrying transport failures, 429 and 5xx with
    /// exponential backoff. Other non-2xx statuses fail immediately.
    pub fn post<B: Serialize>(&self, url: &str, body: &B) -> Result<serde_json::Value, HttpError> {
        let _permit = self.in_flight.acquire();
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let mut request = self.client.post(url).json(body);
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            let outcome = request.send();
            let retry_left = attempt <= self.max_retries;
            match outcome {
                Err(e) => {
                    if !retry_left {
                        return Err(HttpError::Transport {
                            attempts: attempt,
                            message: e.to_string(),
                        });
                    }
                    log::warn!("POST {url} failed (attempt {attempt}): {e}");
                }
                Ok(response) => {
                    let status = response.status();
                    let text = response.text().map_err(|e| HttpError::Transport {
                        attempts: attempt,
                        message: e.to_string(),
                    })?;
                    if status.is_success() {
                        return serde_json::from_str(&text)
                            .map_err(|e| HttpError::Malformed(format!("{e}: {text}")));
                    }
                    if !(retryable(status) && retry_left) {
                        return Err(HttpError::Status {
                            status: status.as_u16(),
                            body: text,
                        });
                    }
                    log::warn!("POST {url} returned {status} (attempt {attempt}), retrying");
                }
            }
            std::thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
        }
    }
}

pub fn endpoint(base_url: &str, path: &str) -> String {
    format!("{}/{}", base_url.trim_end_matches('/'), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joins_endpoint() {
        assert_eq!(endpoint("http://h/v1/", "chat/completions"), "http://h/v1/chat/completions");
        assert_eq!(endpoint("http://h/v1", "embeddings"), "http://h/v1/embeddings");
    }

    #[test]
    fn unset_key_is_config_error() {
        assert!(resolve_api_key(None).unwrap().is_none());
        assert!(matches!(
            resolve_api_key(Some("MDSBENCH_SURELY_UNSET_VAR")),
            Err(HttpError::Config(_))
        ));
    }

    #[test]
    fn refused_connection_exhausts_retries() {
        let poster = JsonPoster::new(
            Duration::from_secs(2),
            None,
            2,
            Duration::from_millis(1),
            1,
        )
        .unwrap();
        // Port 9 (discard) is not listening in the sandbox.
        match poster.post("http://127.0.0.1:9/x", &serde_json::json!({})) {
            Err(HttpError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
