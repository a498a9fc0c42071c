//! Endpoint contracts for text completion and embedding.
//!
//! Both traits are synchronous and `Sync` so callers can fan requests out
//! over a thread pool. HTTP implementations speak the OpenAI-compatible
//! wire formats; tests substitute in-process mocks.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub const ENV_LLM_URL: &str = "LITGRAPH_LLM_URL";
pub const ENV_LLM_KEY: &str = "LITGRAPH_LLM_KEY";
pub const ENV_EMBED_URL: &str = "LITGRAPH_EMBED_URL";
pub const ENV_MODEL_URL: &str = "LITGRAPH_MODEL_URL";

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request to {url} failed: {message}")]
    Transport { url: String, message: String },
    #[error("unexpected response from {url}: {message}")]
    BadResponse { url: String, message: String },
    #[error("{0}")]
    Other(String),
}

/// One prompt sent with greedy decoding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRequest {
    pub prompt: String,
    /// `None` leaves the cap to the server.
    pub max_tokens: Option<u32>,
    pub temperature: f32,
}

impl CompletionRequest {
    pub fn greedy(prompt: impl Into<String>, max_tokens: Option<u32>) -> Self {
        Self {
            prompt: prompt.into(),
            max_tokens,
            temperature: 0.0,
        }
    }
}

pub trait CompletionClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError>;
}

pub trait EmbeddingClient: Send + Sync {
    /// Returns one vector per input text, in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ClientError>;
}

impl<T: CompletionClient + ?Sized> CompletionClient for &T {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        (**self).complete(request)
    }
}

impl<T: EmbeddingClient + ?Sized> EmbeddingClient for &T {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ClientError> {
        (**self).embed(texts)
    }
}

/// Bounded retries with exponential backoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(attempts: u32) -> Self {
        Self {
            attempts,
            initial_backoff: Duration::ZERO,
        }
    }

    /// Runs `op` until it succeeds or attempts run out; returns the last error.
    pub fn run<T, E: std::fmt::Display>(
        &self,
        mut op: impl FnMut() -> Result<T, E>,
    ) -> Result<T, E> {
        let mut backoff = self.initial_backoff;
        let attempts = self.attempts.max(1);
        for attempt in 1..=attempts {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if attempt == attempts => return Err(e),
                Err(e) => {
                    log::warn!("attempt {attempt}/{attempts} failed: {e}");
                    if !backoff.is_zero() {
                        thread::sleep(backoff);
                    }
                    backoff *= 2;
                }
            }
        }
        unreachable!("loop returns on the final attempt")
    }
}

/// Which OpenAI-compatible route the completion client targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CompletionApi {
    /// `/chat/completions` with a single user message.
    #[default]
    Chat,
    /// `/completions` with a raw prompt.
    Completions,
}

#[derive(Debug, Clone)]
pub struct HttpCompletionClient {
    pub url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub api: CompletionApi,
    agent: ureq::Agent,
}

impl HttpCompletionClient {
    pub fn new(url: impl Into<String>, model: impl Into<String>, api: CompletionApi) -> Self {
        Self {
            url: url.into(),
            model: model.into(),
            api_key: None,
            api,
            agent: agent(),
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    /// The JSON body sent for `request`.
    pub fn request_body(&self, request: &CompletionRequest) -> serde_json::Value {
        let mut body = match self.api {
            CompletionApi::Chat => json!({
                "model": self.model,
                "messages": [{"role": "user", "content": request.prompt}],
                "temperature": request.temperature,
            }),
            CompletionApi::Completions => json!({
                "model": self.model,
                "prompt": request.prompt,
                "temperature": request.temperature,
            }),
        };
        if let Some(cap) = request.max_tokens {
            body["max_tokens"] = json!(cap);
        }
        body
    }
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct Choice {
    message: Option<ChoiceMessage>,
    text: Option<String>,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

impl CompletionClient for HttpCompletionClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        let body = self.request_body(request);
        let response: CompletionResponse = post_json(&self.agent, &self.url, self.api_key.as_deref(), &body)?;
        let choice = response
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ClientError::BadResponse {
                url: self.url.clone(),
                message: "no choices".into(),
            })?;
        choice
            .message
            .and_then(|m| m.content)
            .or(choice.text)
            .ok_or_else(|| ClientError::BadResponse {
                url: self.url.clone(),
                message: "choice has neither message.content nor text".into(),
            })
    }
}

#[derive(Debug, Clone)]
pub struct HttpEmbeddingClient {
    pub url: String,
    pub model: String,
    pub api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpEmbeddingClient {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            model: model.into(),
            api_key: None,
            agent: agent(),
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f32>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

impl EmbeddingClient for HttpEmbeddingClient {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ClientError> {
        let body = json!({ "model": self.model, "input": texts });
        let response: EmbeddingResponse = post_json(&self.agent, &self.url, self.api_key.as_deref(), &body)?;
        if response.data.len() != texts.len() {
            return Err(ClientError::BadResponse {
                url: self.url.clone(),
                message: format!("{} inputs but {} embeddings", texts.len(), response.data.len()),
            });
        }
        Ok(response.data.into_iter().map(|d| d.embedding).collect())
    }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(300)))
        .build()
        .into()
}

fn post_json<T: for<'de> Deserialize<'de>>(
    agent: &ureq::Agent,
    url: &str,
    key: Option<&str>,
    body: &serde_json::Value,
) -> Result<T, ClientError> {
    let mut req = agent.post(url);
    if let Some(key) = key {
        req = req.header("Authorization", &format!("Bearer {key}"));
    }
    let mut response = req.send_json(body).map_err(|e| ClientError::Transport {
        url: url.to_owned(),
        message: e.to_string(),
    })?;
    response
        .body_mut()
        .read_json::<T>()
        .map_err(|e| ClientError::BadResponse {
            url: url.to_owned(),
            message: e.to_string(),
        })
}

/// Offline embedder: signed feature hashing of lowercase word tokens.
///
/// Deterministic and dependency-free, so pipelines can run without an
/// embedding endpoint. Texts sharing vocabulary get correlated vectors.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dim must be positive");
        Self { dim }
    }

    pub fn embed_one(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0f32; self.dim];
        let lower = text.to_lowercase();
        let mut any = false;
        for token in lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            let h = fnv1a(token.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
            any = true;
        }
        if !any {
            // keep the vector non-zero so cosine stays defined
            v[0] = 1.0;
        }
        v
    }
}

impl EmbeddingClient for HashingEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ClientError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// 64-bit FNV-1a.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn retry_succeeds_after_transient_failure() {
        let calls = Cell::new(0);
        let out: Result<u32, String> = RetryPolicy::immediate(3).run(|| {
            calls.set(calls.get() + 1);
            if calls.get() == 1 {
                Err("flaky".into())
            } else {
                Ok(7)
            }
        });
        assert_eq!(out.unwrap(), 7);
        assert_eq!(calls.get(), 2);
    }

    #[test]
    fn retry_gives_up_after_attempts() {
        let calls = Cell::new(0);
        let out: Result<(), String> = RetryPolicy::immediate(3).run(|| {
            calls.set(calls.get() + 1);
            Err("down".into())
        });
        assert_eq!(out.unwrap_err(), "down");
        assert_eq!(calls.get(), 3);
    }

    #[test]
    fn chat_body_is_greedy_with_cap() {
        let client = HttpCompletionClient::new("http://x", "m", CompletionApi::Chat);
        let body = client.request_body(&CompletionRequest::greedy("hi", Some(2)));
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["max_tokens"], 2);
        assert_eq!(body["messages"][0]["content"], "hi");
        assert_eq!(body["model"], "m");
    }

    #[test]
    fn completions_body_uses_prompt() {
        let client = HttpCompletionClient::new("http://x", "m", CompletionApi::Completions);
        let body = client.request_body(&CompletionRequest::greedy("hi", None));
        assert_eq!(body["prompt"], "hi");
        assert!(body.get("max_tokens").is_none());
    }

    #[test]
    fn hashing_embedder_is_deterministic() {
        let e = HashingEmbedder::new(32);
        assert_eq!(e.embed_one("Quantum Physics"), e.embed_one("quantum   physics"));
        assert!(e.embed_one("").iter().any(|x| *x != 0.0));
    }
}
