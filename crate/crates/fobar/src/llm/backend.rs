//! Completion backends.
//!
//! `LiveBackend` speaks the OpenAI-compatible chat-completion wire format;
//! `StubBackend` serves scripted completions in memory for tests and
//! offline use. Replay against committed fixtures needs no backend at all:
//! the sampler reads a read-only cache directly.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use serde::Deserialize;
use serde_json::json;

use crate::error::{Error, Result};

/// Parameters for one sampling call.
#[derive(Debug, Clone)]
pub struct SamplingRequest {
    pub prompt: String,
    pub temperature: f64,
    pub num_samples: usize,
    pub max_tokens: usize,
    pub model_id: String,
    pub stop_sequences: Vec<String>,
}

impl SamplingRequest {
    pub fn new(prompt: impl Into<String>, model_id: impl Into<String>, num_samples: usize) -> Self {
        SamplingRequest {
            prompt: prompt.into(),
            temperature: 0.7,
            num_samples,
            max_tokens: 1024,
            model_id: model_id.into(),
            stop_sequences: vec!["Question:".to_string()],
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: usize) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn with_stop_sequences(mut self, stop: Vec<String>) -> Self {
        self.stop_sequences = stop;
        self
    }
}

#[async_trait]
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    /// Fetch `n` fresh completions for the request's prompt, destined for
    /// sample indices `first_index..first_index + n`. Live backends ignore
    /// the index; scripted ones use it so concurrent fetches stay
    /// deterministic. Implementations retry transient failures internally;
    /// an error from here is permanent.
    async fn complete(
        &self,
        request: &SamplingRequest,
        first_index: usize,
        n: usize,
    ) -> Result<Vec<String>>;

    /// Cheap reachability probe run once before a batch starts.
    async fn preflight(&self) -> Result<()> {
        Ok(())
    }
}

// --- live OpenAI-compatible client ---

const DEFAULT_BASE_URL: &str = "https://api.openai.com";
const MAX_ATTEMPTS: u32 = 5;

pub struct LiveBackend {
    client: reqwest::Client,
    base_url: String,
    api_key: String,
    /// First retry delay; doubles per attempt. Tests shrink it.
    pub initial_backoff: Duration,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    #[serde(default)]
    index: Option<usize>,
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: String,
}

impl LiveBackend {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        LiveBackend {
            client: reqwest::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("reqwest client"),
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
            initial_backoff: Duration::from_millis(500),
        }
    }

    /// Endpoint and auth token from the environment. The token is only ever
    /// read from `FOBAR_API_KEY` or `OPENAI_API_KEY`, never from a flag.
    pub fn from_env() -> Result<Self> {
        let base_url = std::env::var("FOBAR_API_BASE")
            .or_else(|_| std::env::var("OPENAI_BASE_URL"))
            .unwrap_or_else(|_| DEFAULT_BASE_URL.to_string());
        let api_key = std::env::var("FOBAR_API_KEY")
            .or_else(|_| std::env::var("OPENAI_API_KEY"))
            .map_err(|_| {
                Error::InvalidConfig(
                    "live backend needs FOBAR_API_KEY or OPENAI_API_KEY in the environment".into(),
                )
            })?;
        Ok(Self::new(base_url, api_key))
    }

    fn completions_url(&self) -> String {
        format!("{}/v1/chat/completions", self.base_url)
    }

    async fn post_once(&self, request: &SamplingRequest, n: usize) -> Result<Vec<String>> {
        let body = json!({
            "model": request.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "n": n,
            "max_tokens": request.max_tokens,
            "stop": request.stop_sequences,
        });
        let response = self
            .client
            .post(self.completions_url())
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .await
            .map_err(|e| transient(format!("transport: {e}")))?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(transient(format!("status {status}")));
        }
        if !status.is_success() {
            let detail = response.text().await.unwrap_or_default();
            return Err(Error::Backend {
                backend_id: "live".into(),
                message: format!(
                    "status {status}: {}",
                    detail.chars().take(400).collect::<String>()
                ),
            });
        }
        let parsed: ChatResponse = response
            .json()
            .await
            .map_err(|e| transient(format!("malformed response: {e}")))?;
        let mut choices: Vec<(usize, String)> = parsed
            .choices
            .into_iter()
            .enumerate()
            .map(|(i, c)| (c.index.unwrap_or(i), c.message.content))
            .collect();
        choices.sort_by_key(|(i, _)| *i);
        Ok(choices.into_iter().map(|(_, text)| text).collect())
    }
}

fn transient(message: String) -> Error {
    Error::Backend {
        backend_id: "live(transient)".into(),
        message,
    }
}

fn is_transient(err: &Error) -> bool {
    matches!(err, Error::Backend { backend_id, .. } if backend_id == "live(transient)")
}

#[async_trait]
impl Backend for LiveBackend {
    fn id(&self) -> &str {
        "live"
    }

    async fn complete(
        &self,
        request: &SamplingRequest,
        _first_index: usize,
        n: usize,
    ) -> Result<Vec<String>> {
        let mut backoff = self.initial_backoff;
        let mut last_err = None;
        for attempt in 1..=MAX_ATTEMPTS {
            match self.post_once(request, n).await {
                Ok(texts) => return Ok(texts),
                Err(err) if is_transient(&err) && attempt < MAX_ATTEMPTS => {
                    tracing::warn!(attempt, error = %err, "retrying after transient failure");
                    tokio::time::sleep(backoff).await;
                    backoff = (backoff * 2).min(Duration::from_secs(8));
                    last_err = Some(err);
                }
                Err(err) => return Err(err),
            }
        }
        Err(last_err.expect("loop exits via return"))
    }

    async fn preflight(&self) -> Result<()> {
        // any HTTP response at all counts as reachable; only a transport
        // failure (dns, refused, timeout) aborts the run
        self.client
            .get(format!("{}/v1/models", self.base_url))
            .bearer_auth(&self.api_key)
            .send()
            .await
            .map_err(|e| Error::Unreachable(format!("{}: {e}", self.base_url)))?;
        Ok(())
    }
}

// --- scripted in-memory backend ---

/// Deterministic backend serving completions scripted per (prompt, sample
/// index), with a request counter for instrumentation.
#[derive(Default)]
pub struct StubBackend {
    responses: Mutex<HashMap<String, Vec<String>>>,
    requests: AtomicUsize,
}

impl StubBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Set the full per-index completion list for a prompt.
    pub fn script(&self, prompt: impl Into<String>, texts: Vec<String>) {
        self.responses.lock().unwrap().insert(prompt.into(), texts);
    }

    /// Total completed `complete` calls.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl Backend for StubBackend {
    fn id(&self) -> &str {
        "stub"
    }

    async fn complete(
        &self,
        request: &SamplingRequest,
        first_index: usize,
        n: usize,
    ) -> Result<Vec<String>> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let map = self.responses.lock().unwrap();
        let texts = map.get(&request.prompt).ok_or_else(|| Error::Backend {
            backend_id: "stub".into(),
            message: format!(
                "no scripted completions for prompt starting {:?}",
                request.prompt.chars().take(60).collect::<String>()
            ),
        })?;
        if first_index + n > texts.len() {
            return Err(Error::Backend {
                backend_id: "stub".into(),
                message: format!(
                    "scripted completions exhausted: asked for samples {first_index}..{}, \
                     only {} scripted",
                    first_index + n,
                    texts.len()
                ),
            });
        }
        Ok(texts[first_index..first_index + n].to_vec())
    }
}
