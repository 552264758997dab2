//! Text embedding providers.
//!
//! [`HashEmbedder`] is a deterministic offline embedder: every lowercase
//! alphanumeric token seeds a pseudo-random direction, the directions are
//! summed and the result is L2-normalized. Texts that share tokens end up
//! close, identical texts map to identical vectors.
//!
//! [`HttpEmbedder`] talks to an OpenAI-embeddings-compatible endpoint.

use serde::Deserialize;
use serde_json::json;

use super::similarity::l2_normalize;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding transport error{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Transport {
        status: Option<u16>,
        message: String,
    },
    #[error("embedding has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("malformed embedding response: {0}")]
    Malformed(String),
}

pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded token-hash projection embedder.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, seed }
    }

    fn accumulate(&self, token: &str, acc: &mut [f64]) {
        let mut state = fnv1a(token.as_bytes()) ^ self.seed.rotate_left(17);
        for slot in acc.iter_mut() {
            // 53 random bits mapped onto [-1, 1)
            let unit = (splitmix64(&mut state) >> 11) as f64 / (1u64 << 53) as f64;
            *slot += 2.0 * unit - 1.0;
        }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(64, 0x5eed)
    }
}

pub(crate) fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

impl Embedder for HashEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut acc = vec![0.0; self.dim];
        let mut any = false;
        for token in tokens(text) {
            self.accumulate(&token, &mut acc);
            any = true;
        }
        if !any {
            // punctuation-only text still gets a stable direction
            self.accumulate(text.trim(), &mut acc);
        }
        l2_normalize(&mut acc);
        Ok(acc)
    }
}

/// Client for `POST {"input": [...], "model": ...}` embedding endpoints.
pub struct HttpEmbedder {
    client: reqwest::blocking::Client,
    url: String,
    key: Option<String>,
    model: String,
    dim: usize,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    pub fn new(url: impl Into<String>, key: Option<String>, model: impl Into<String>, dim: usize) -> Self {
        Self {
            client: reqwest::blocking::Client::new(),
            url: url.into(),
            key,
            model: model.into(),
            dim,
        }
    }

    /// Reads `MEM_EMBED_URL`, `MEM_EMBED_KEY` and optionally `MEM_EMBED_MODEL`.
    /// Returns `None` when no URL is configured.
    pub fn from_env(dim: usize) -> Option<Self> {
        let url = std::env::var("MEM_EMBED_URL").ok().filter(|u| !u.is_empty())?;
        let key = std::env::var("MEM_EMBED_KEY").ok().filter(|k| !k.is_empty());
        let model = std::env::var("MEM_EMBED_MODEL").unwrap_or_else(|_| "bge-m3".to_string());
        Some(Self::new(url, key, model, dim))
    }
}

impl Embedder for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let mut out = self.embed_batch(&[text])?;
        out.pop()
            .ok_or_else(|| EmbedError::Malformed("empty data array".into()))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(EmbedError::EmptyText);
        }
        let mut req = self
            .client
            .post(&self.url)
            .json(&json!({ "input": texts, "model": self.model }));
        if let Some(key) = &self.key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| EmbedError::Transport {
            status: e.status().map(|s| s.as_u16()),
            message: e.to_string(),
        })?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(EmbedError::Transport {
                status: Some(status.as_u16()),
                message: body,
            });
        }
        let parsed: EmbeddingResponse = resp
            .json()
            .map_err(|e| EmbedError::Malformed(e.to_string()))?;
        if parsed.data.len() != texts.len() {
            return Err(EmbedError::Malformed(format!(
                "{} embeddings for {} inputs",
                parsed.data.len(),
                texts.len()
            )));
        }
        parsed
            .data
            .into_iter()
            .map(|d| {
                if d.embedding.len() == self.dim {
                    Ok(d.embedding)
                } else {
                    Err(EmbedError::Dimension {
                        expected: self.dim,
                        got: d.embedding.len(),
                    })
                }
            })
            .collect()
    }
}
