//! Free-recall scoring: BLEU and embedding similarity.

use std::collections::{BTreeMap, HashMap};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::MetricError;

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '\'')
        .map(|w| w.trim_matches('\'').to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// Sentence BLEU with 4-gram uniform weights, add-one smoothing on orders
/// two to four, and the standard brevity penalty.
pub fn bleu(candidate: &str, reference: &str) -> f64 {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let cand = ngram_counts(&c, n);
        let refc = ngram_counts(&r, n);
        let matches: usize = cand
            .iter()
            .map(|(g, k)| (*k).min(refc.get(g).copied().unwrap_or(0)))
            .sum();
        let total = c.len().saturating_sub(n - 1);
        let p = if n == 1 {
            matches as f64 / total as f64
        } else {
            (matches as f64 + 1.0) / (total as f64 + 1.0)
        };
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln() / 4.0;
    }
    let bp = if c.len() > r.len() {
        1.0
    } else {
        (1.0 - r.len() as f64 / c.len() as f64).exp()
    };
    (bp * log_sum.exp()).clamp(0.0, 1.0)
}

/// Text similarity backend for free-recall scoring.
pub trait Embedder: Send + Sync {
    fn name(&self) -> String;

    /// Similarity in [0, 1].
    fn similarity(&self, a: &str, b: &str) -> Result<f64, MetricError>;
}

/// Offline term-frequency cosine.
#[derive(Debug, Clone, Copy, Default)]
pub struct TfEmbedder;

impl Embedder for TfEmbedder {
    fn name(&self) -> String {
        "tf-cosine".into()
    }

    fn similarity(&self, a: &str, b: &str) -> Result<f64, MetricError> {
        // ordered so the float sums do not depend on hash seeds
        let tf = |t: &str| {
            let mut m: BTreeMap<String, f64> = BTreeMap::new();
            for w in tokenize(t) {
                *m.entry(w).or_insert(0.0) += 1.0;
            }
            m
        };
        let (ta, tb) = (tf(a), tf(b));
        if !ta.is_empty() && ta == tb {
            return Ok(1.0);
        }
        let dot: f64 = ta.iter().map(|(w, x)| x * tb.get(w).copied().unwrap_or(0.0)).sum();
        let na = ta.values().map(|x| x * x).sum::<f64>().sqrt();
        let nb = tb.values().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return Ok(0.0);
        }
        Ok((dot / (na * nb)).clamp(0.0, 1.0))
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Remote embedder speaking the OpenAI-compatible `/embeddings` protocol.
/// Blocking; call from a worker thread when inside an async runtime.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    pub url: String,
    pub model: String,
    pub api_key: Option<String>,
    client: reqwest::blocking::Client,
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
    pub fn new(url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .expect("http client builds");
        HttpEmbedder {
            url: url.into(),
            model: model.into(),
            api_key,
            client,
        }
    }

    fn embed(&self, inputs: &[&str]) -> Result<Vec<Vec<f64>>, MetricError> {
        let unavailable = |e: String| MetricError::EmbedderUnavailable(e);
        let mut req = self
            .client
            .post(&self.url)
            .json(&json!({ "model": self.model, "input": inputs }));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| unavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(unavailable(format!("status {}", resp.status())));
        }
        let body: EmbeddingResponse = resp.json().map_err(|e| unavailable(e.to_string()))?;
        if body.data.len() != inputs.len() {
            return Err(unavailable("embedding count mismatch".into()));
        }
        Ok(body.data.into_iter().map(|d| d.embedding).collect())
    }
}

impl Embedder for HttpEmbedder {
    fn name(&self) -> String {
        self.model.clone()
    }

    fn similarity(&self, a: &str, b: &str) -> Result<f64, MetricError> {
        let v = self.embed(&[a, b])?;
        Ok(cosine(&v[0], &v[1]).clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeRecallScore {
    pub bleu: f64,
    pub similarity: f64,
    pub embedder: String,
    /// Set when the configured embedder failed and the offline one was used.
    pub fallback: bool,
}

pub fn free_recall_score(candidate: &str, reference: &str, embedder: &dyn Embedder) -> FreeRecallScore {
    let bleu = bleu(candidate, reference);
    match embedder.similarity(candidate, reference) {
        Ok(similarity) => FreeRecallScore {
            bleu,
            similarity,
            embedder: embedder.name(),
            fallback: false,
        },
        Err(e) => {
            log::warn!("embedder {} failed ({e}); using term-frequency fallback", embedder.name());
            let similarity = TfEmbedder.similarity(candidate, reference).unwrap_or(0.0);
            FreeRecallScore {
                bleu,
                similarity,
                embedder: TfEmbedder.name(),
                fallback: true,
            }
        }
    }
}
