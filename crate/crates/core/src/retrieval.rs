//! Query-relevance ranking and order-preserving document selection.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::Document;
use crate::net::{endpoint, resolve_api_key, HttpError, JsonPoster};
use crate::tokenizer::Tokenizer;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("embedder config: {0}")]
    Config(String),
    #[error("nothing to embed")]
    EmptyBatch,
    #[error("embedding request failed: {0}")]
    Http(#[from] HttpError),
    #[error("embedding response: {0}")]
    Malformed(String),
    #[error("top-ranked document `{doc_id}` ({tokens} tokens) exceeds the input cap of {cap}")]
    EmptySelection {
        doc_id: String,
        tokens: usize,
        cap: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDocument {
    pub doc_id: String,
    pub score: f64,
    pub original_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    HashedTfidf,
    HttpEmbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    pub dims: usize,
    pub base_url: Option<String>,
    pub model_name: Option<String>,
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    /// Texts per HTTP request; larger batches are split.
    pub max_batch: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            kind: EmbedderKind::HashedTfidf,
            dims: 4096,
            base_url: None,
            model_name: None,
            api_key_env: None,
            timeout_secs: 120,
            max_retries: 3,
            retry_backoff_ms: 1000,
            max_batch: 128,
        }
    }
}

impl EmbedderConfig {
    pub fn hashed(dims: usize) -> Self {
        Self {
            dims,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        match self.kind {
            EmbedderKind::HashedTfidf if self.dims < 64 => Err(RetrievalError::Config(format!(
                "dims must be at least 64, got {}",
                self.dims
            ))),
            EmbedderKind::HttpEmbed
                if self.base_url.as_deref().is_none_or(str::is_empty)
                    || self.model_name.as_deref().is_none_or(str::is_empty) =>
            {
                Err(RetrievalError::Config(
                    "http_embed requires base_url and model_name".into(),
                ))
            }
            EmbedderKind::HttpEmbed if self.max_batch == 0 => {
                Err(RetrievalError::Config("max_batch must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Embedder>, RetrievalError> {
        self.validate()?;
        Ok(match self.kind {
            EmbedderKind::HashedTfidf => Box::new(HashedTfIdf::new(self.dims)),
            EmbedderKind::HttpEmbed => Box::new(HttpEmbedder::from_config(self)?),
        })
    }
}

/// Produces unit-normalized vectors for a batch of texts.
pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, RetrievalError>;
}

/// Hashing-trick tf-idf with document frequencies taken over the batch.
#[derive(Debug, Clone)]
pub struct HashedTfIdf {
    dims: usize,
}

impl HashedTfIdf {
    pub fn new(dims: usize) -> Self {
        Self { dims }
    }

    pub fn bucket(&self, term: &str) -> usize {
        (fnv1a(term.as_bytes()) % self.dims as u64) as usize
    }
}

/// Lowercased alphanumeric runs.
pub fn terms(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

pub fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Embedder for HashedTfIdf {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, RetrievalError> {
        if texts.is_empty() {
            return Err(RetrievalError::EmptyBatch);
        }
        let term_counts: Vec<HashMap<String, usize>> = texts
            .iter()
            .map(|t| {
                let mut counts = HashMap::new();
                for term in terms(t) {
                    *counts.entry(term).or_insert(0) += 1;
                }
                counts
            })
            .collect();
        let mut df: HashMap<&str, usize> = HashMap::new();
        for counts in &term_counts {
            for term in counts.keys() {
                *df.entry(term.as_str()).or_insert(0) += 1;
            }
        }
        let n = texts.len() as f64;
        Ok(term_counts
            .iter()
            .map(|counts| {
                let mut v = vec![0.0; self.dims];
                // Sorted so float accumulation order is reproducible.
                let mut entries: Vec<_> = counts.iter().collect();
                entries.sort();
                for (term, &tf) in entries {
                    let idf = (1.0 + n / df[term.as_str()] as f64).ln();
                    v[self.bucket(term)] += tf as f64 * idf;
                }
                l2_normalize(&mut v);
                v
            })
            .collect())
    }
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

/// Client for `POST {base_url}/embeddings`.
#[derive(Debug)]
pub struct HttpEmbedder {
    url: String,
    model: String,
    max_batch: usize,
    poster: JsonPoster,
}

impl HttpEmbedder {
    pub fn from_config(cfg: &EmbedderConfig) -> Result<Self, RetrievalError> {
        let api_key = resolve_api_key(cfg.api_key_env.as_deref())
            .map_err(|e| RetrievalError::Config(e.to_string()))?;
        let poster = JsonPoster::new(
            Duration::from_secs(cfg.timeout_secs),
            api_key,
            cfg.max_retries,
            Duration::from_millis(cfg.retry_backoff_ms),
            8,
        )?;
        Ok(Self {
            url: endpoint(cfg.base_url.as_deref().unwrap_or_default(), "embeddings"),
            model: cfg.model_name.clone().unwrap_or_default(),
            max_batch: cfg.max_batch.max(1),
            poster,
        })
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, RetrievalError> {
        let response = self.poster.post(
            &self.url,
            &EmbeddingRequest {
                model: &self.model,
                input: texts,
            },
        )?;
        let data = response
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| RetrievalError::Malformed("missing `data` array".into()))?;
        if data.len() != texts.len() {
            return Err(RetrievalError::Malformed(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                data.len()
            )));
        }
        let mut out: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        for (pos, item) in data.iter().enumerate() {
            let index = item
                .get("index")
                .and_then(Value::as_u64)
                .map_or(pos, |i| i as usize);
            let vector = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| RetrievalError::Malformed(format!("data[{pos}] has no embedding")))?
                .iter()
                .map(|x| {
                    x.as_f64()
                        .ok_or_else(|| RetrievalError::Malformed("non-numeric embedding".into()))
                })
                .collect::<Result<Vec<f64>, _>>()?;
            let slot = out
                .get_mut(index)
                .ok_or_else(|| RetrievalError::Malformed(format!("index {index} out of range")))?;
            *slot = Some(vector);
        }
        out.into_iter()
            .enumerate()
            .map(|(i, v)| {
                let mut v = v.ok_or_else(|| RetrievalError::Malformed(format!("missing index {i}")))?;
                l2_normalize(&mut v);
                Ok(v)
            })
            .collect()
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, RetrievalError> {
        if texts.is_empty() {
            return Err(RetrievalError::EmptyBatch);
        }
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.max_batch) {
            out.extend(self.embed_batch(batch)?);
        }
        Ok(out)
    }
}

/// Ranks documents by cosine similarity to `query`, each document capped at
/// `doc_cap` tokens before embedding. The query and documents are embedded in
/// one batch. Ties keep dataset order.
pub fn rank_documents(
    query: &str,
    docs: &[Document],
    embedder: &dyn Embedder,
    tok: &dyn Tokenizer,
    doc_cap: usize,
) -> Result<Vec<ScoredDocument>, RetrievalError> {
    if docs.is_empty() {
        return Err(RetrievalError::EmptyBatch);
    }
    let mut batch = Vec::with_capacity(docs.len() + 1);
    batch.push(query.to_string());
    batch.extend(
        docs.iter()
            .map(|d| tok.truncate_tokens(&d.text, doc_cap).to_string()),
    );
    let vectors = embedder.embed(&batch)?;
    if vectors.len() != batch.len() {
        return Err(RetrievalError::Malformed(format!(
            "embedder returned {} vectors for {} texts",
            vectors.len(),
            batch.len()
        )));
    }
    let query_vec = &vectors[0];
    let mut ranked: Vec<ScoredDocument> = docs
        .iter()
        .zip(&vectors[1..])
        .enumerate()
        .map(|(i, (doc, v))| ScoredDocument {
            doc_id: doc.id.clone(),
            score: dot(query_vec, v),
            original_index: i,
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.original_index.cmp(&b.original_index))
    });
    Ok(ranked)
}

/// Accepts the longest rank prefix whose total token count fits `input_cap`
/// and returns those documents in their original order.
pub fn select_order_preserving(
    ranked: &[ScoredDocument],
    docs: &[Document],
    input_cap: usize,
    tok: &dyn Tokenizer,
) -> Result<Vec<Document>, RetrievalError> {
    let mut used = 0usize;
    let mut accepted = Vec::new();
    for scored in ranked {
        let doc = &docs[scored.original_index];
        let tokens = tok.count_tokens(&doc.text);
        if used + tokens > input_cap {
            if accepted.is_empty() {
                return Err(RetrievalError::EmptySelection {
                    doc_id: scored.doc_id.clone(),
                    tokens,
                    cap: input_cap,
                });
            }
            break;
        }
        used += tokens;
        accepted.push(scored.original_index);
    }
    accepted.sort_unstable();
    Ok(accepted.into_iter().map(|i| docs[i].clone()).collect())
}
