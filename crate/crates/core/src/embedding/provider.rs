use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EmbeddingVector;
use crate::error::{Error, Result};

pub trait EmbeddingProvider: Send + Sync {
    /// Stable identifier recorded in the index.
    fn name(&self) -> String;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;
}

pub fn embed(text: &str, provider: &dyn EmbeddingProvider) -> Result<EmbeddingVector> {
    provider
        .embed_batch(&[text.to_string()])?
        .pop()
        .ok_or_else(|| Error::Embedding("provider returned no vector".into()))
}

/// Embeds `texts` in batches of `batch_size`, batches running in parallel.
/// Output order matches input order.
pub fn embed_all(
    texts: &[String],
    provider: &dyn EmbeddingProvider,
    batch_size: usize,
) -> Result<Vec<EmbeddingVector>> {
    let batches: Vec<Result<Vec<EmbeddingVector>>> = texts
        .par_chunks(batch_size.max(1))
        .map(|chunk| {
            let out = provider.embed_batch(chunk)?;
            if out.len() != chunk.len() {
                return Err(Error::Embedding(format!(
                    "provider returned {} vectors for {} inputs",
                    out.len(),
                    chunk.len()
                )));
            }
            Ok(out)
        })
        .collect();
    let mut out = Vec::with_capacity(texts.len());
    let mut dim = None;
    for batch in batches {
        for vector in batch? {
            match dim {
                None => dim = Some(vector.dim()),
                Some(d) if d != vector.dim() => return Err(Error::DimensionMismatch(d, vector.dim())),
                _ => {}
            }
            out.push(vector);
        }
    }
    Ok(out)
}

/// Offline provider: L2-normalised feature-hashed bag of identifier tokens.
///
/// Component 0 is a constant bias so the empty text still has a direction.
/// Identifiers contribute their full lowercase form and, when compound, each
/// snake_case / camelCase part.
#[derive(Debug, Clone)]
pub struct HashedProvider {
    dim: usize,
}

impl Default for HashedProvider {
    fn default() -> Self {
        Self::new(256)
    }
}

impl HashedProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2, "need room for the bias and at least one bucket");
        Self { dim }
    }

    fn bucket(&self, token: &str) -> usize {
        1 + (fnv1a(token.as_bytes()) % (self.dim as u64 - 1)) as usize
    }

    pub fn vector(&self, text: &str) -> EmbeddingVector {
        let mut values = vec![0f32; self.dim];
        values[0] = 1.0;
        for token in tokens(text) {
            values[self.bucket(&token)] += 1.0;
        }
        let norm = values.iter().map(|v| v * v).sum::<f32>().sqrt();
        for v in &mut values {
            *v /= norm;
        }
        EmbeddingVector { values }
    }
}

impl EmbeddingProvider for HashedProvider {
    fn name(&self) -> String {
        format!("hashed-{}", self.dim)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Python keywords and receiver names carry no meaning for similarity.
const STOP_WORDS: &[&str] = &[
    "and", "as", "assert", "async", "await", "break", "class", "cls", "continue", "def", "del", "elif", "else",
    "except", "false", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda", "none", "nonlocal",
    "not", "or", "pass", "raise", "return", "self", "true", "try", "while", "with", "yield",
];

/// Folds a plural `-s` so `options` and `option` share a feature.
fn normalize(token: String) -> String {
    if token.len() > 3 && token.ends_with('s') && !token.ends_with("ss") {
        token[..token.len() - 1].to_string()
    } else {
        token
    }
}

fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
    {
        let lower = word.to_lowercase();
        if STOP_WORDS.contains(&lower.as_str()) {
            continue;
        }
        let parts = split_identifier(word);
        out.push(normalize(lower));
        if parts.len() > 1 {
            out.extend(parts.into_iter().map(normalize));
        }
    }
    out
}

fn split_identifier(word: &str) -> Vec<String> {
    let mut parts = Vec::new();
    for piece in word.split('_').filter(|p| !p.is_empty()) {
        let mut current = String::new();
        let mut prev_lower = false;
        for c in piece.chars() {
            if c.is_uppercase() && prev_lower && !current.is_empty() {
                parts.push(std::mem::take(&mut current).to_lowercase());
            }
            prev_lower = c.is_lowercase() || c.is_ascii_digit();
            current.push(c);
        }
        if !current.is_empty() {
            parts.push(current.to_lowercase());
        }
    }
    parts
}

/// HTTP provider speaking the common `{"input": [...], "model": ...}` →
/// `{"data": [{"embedding": [...]}]}` embeddings shape.
#[derive(Debug, Clone)]
pub struct RemoteProvider {
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub max_retries: u32,
    pub timeout: Duration,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    input: &'a [String],
    model: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f32>,
}

impl RemoteProvider {
    pub fn new(url: impl Into<String>, api_key: Option<String>, model: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            api_key,
            model: model.into(),
            max_retries: 2,
            timeout: Duration::from_secs(60),
        }
    }

    fn request(&self, texts: &[String]) -> std::result::Result<Vec<EmbeddingVector>, String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut request = agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let response = request
            .send_json(EmbedRequest {
                input: texts,
                model: &self.model,
            })
            .map_err(|e| e.to_string())?;
        let parsed: EmbedResponse = response.into_body().read_json().map_err(|e| e.to_string())?;
        parsed
            .data
            .into_iter()
            .map(|d| EmbeddingVector::new(d.embedding).map_err(|e| e.to_string()))
            .collect()
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn name(&self) -> String {
        format!("remote:{}", self.model)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let mut last_error = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(200 * u64::from(attempt)));
            }
            match self.request(texts) {
                Ok(vectors) => return Ok(vectors),
                Err(e) => last_error = e,
            }
        }
        Err(Error::Embedding(format!(
            "{} failed after {} attempts: {last_error}",
            self.url,
            self.max_retries + 1
        )))
    }
}
