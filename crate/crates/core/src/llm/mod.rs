//! Chat-completion client shared by the negator, judge and inference runner.

mod http;
pub mod prompt;

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::jsonl;
use crate::error::{Error, Result};

pub use http::HttpBackend;
pub use prompt::{assets, bindings, render_template, PromptTemplate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<()> {
        let first = self
            .messages
            .first()
            .ok_or_else(|| Error::InvalidRequest("no messages".into()))?;
        if first.role == Role::Assistant {
            return Err(Error::InvalidRequest("first message must be system or user".into()));
        }
        if let Some(i) = self.messages.iter().position(|m| m.content.trim().is_empty()) {
            return Err(Error::InvalidRequest(format!("message {i} is empty")));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(Error::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(Error::InvalidRequest("max_tokens must be > 0".into()));
        }
        Ok(())
    }

    /// Content hash over model, messages and temperature.
    pub fn cache_key(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.model.as_bytes());
        h.update([0x1e]);
        for m in &self.messages {
            h.update(serde_json::to_string(&m.role).unwrap_or_default().as_bytes());
            h.update([0x1f]);
            h.update(m.content.as_bytes());
            h.update([0x1e]);
        }
        h.update(self.temperature.to_bits().to_be_bytes());
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
    #[serde(default)]
    pub total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub finish_reason: String,
    pub usage: Usage,
}

impl ChatResponse {
    pub fn text(content: impl Into<String>) -> Self {
        ChatResponse {
            content: content.into(),
            finish_reason: "stop".into(),
            usage: Usage::default(),
        }
    }
}

/// Failure of a single send.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SendError {
    /// Worth retrying: timeouts, connection errors, 429 and 5xx.
    Transient(String),
    /// The response arrived but could not be understood.
    Protocol(String),
    /// Retrying cannot help (rejected credentials, bad request).
    Fatal(String),
}

/// Anything that answers chat requests.
pub trait ChatBackend: Send + Sync {
    fn id(&self) -> String;
    fn send(&self, request: &ChatRequest) -> std::result::Result<ChatResponse, SendError>;
}

type Responder = dyn Fn(&ChatRequest) -> std::result::Result<String, SendError> + Send + Sync;

/// In-process backend driven by a closure. Counts the sends it receives.
pub struct MockBackend {
    id: String,
    respond: Box<Responder>,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(
        id: &str,
        respond: impl Fn(&ChatRequest) -> std::result::Result<String, SendError> + Send + Sync + 'static,
    ) -> Self {
        MockBackend {
            id: id.to_string(),
            respond: Box::new(respond),
            calls: AtomicUsize::new(0),
        }
    }

    /// Always replies with `reply`.
    pub fn canned(reply: &str) -> Self {
        let reply = reply.to_string();
        Self::new("mock", move |_| Ok(reply.clone()))
    }

    /// Always fails transiently.
    pub fn failing() -> Self {
        Self::new("mock-failing", |_| Err(SendError::Transient("HTTP 500".into())))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatBackend for MockBackend {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn send(&self, request: &ChatRequest) -> std::result::Result<ChatResponse, SendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.respond)(request).map(ChatResponse::text)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Arc<B> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn send(&self, request: &ChatRequest) -> std::result::Result<ChatResponse, SendError> {
        (**self).send(request)
    }
}

/// Model name and sampling settings applied to rendered prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            model: "mock".into(),
            temperature: 0.0,
            max_tokens: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    /// Re-sends allowed after the first attempt.
    pub max_retries: u32,
    pub backoff: Duration,
    pub max_backoff: Duration,
    pub concurrency: usize,
    pub cache: bool,
    /// Where cached responses persist between runs.
    pub cache_path: Option<PathBuf>,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            max_retries: 3,
            backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
            concurrency: 4,
            cache: true,
            cache_path: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    response: ChatResponse,
}

/// Retrying, caching front end over a [`ChatBackend`].
pub struct ChatClient {
    backend: Box<dyn ChatBackend>,
    config: ClientConfig,
    cache: Mutex<HashMap<String, ChatResponse>>,
    cache_file: Mutex<Option<BufWriter<File>>>,
    pool: rayon::ThreadPool,
    sends: AtomicUsize,
    hits: AtomicUsize,
}

impl ChatClient {
    pub fn new(backend: impl ChatBackend + 'static, config: ClientConfig) -> Result<Self> {
        let mut cache = HashMap::new();
        let mut cache_file = None;
        if let (true, Some(path)) = (config.cache, config.cache_path.as_ref()) {
            if path.exists() {
                for (_, line) in jsonl::read_records::<CacheLine>(path)? {
                    cache.insert(line.key, line.response);
                }
            } else if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            cache_file = Some(BufWriter::new(file));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.concurrency.max(1))
            .build()
            .map_err(|e| Error::InvalidRequest(e.to_string()))?;
        Ok(ChatClient {
            backend: Box::new(backend),
            config,
            cache: Mutex::new(cache),
            cache_file: Mutex::new(cache_file),
            pool,
            sends: AtomicUsize::new(0),
            hits: AtomicUsize::new(0),
        })
    }

    pub fn backend_id(&self) -> String {
        self.backend.id()
    }

    /// Sends that reached the backend, retries included.
    pub fn sends(&self) -> usize {
        self.sends.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        request.validate()?;
        let key = self.config.cache.then(|| request.cache_key());
        if let Some(key) = &key {
            if let Some(hit) = self.cache.lock().expect("cache lock").get(key) {
                self.hits.fetch_add(1, Ordering::SeqCst);
                return Ok(hit.clone());
            }
        }
        let response = self.send_with_retry(request)?;
        if let Some(key) = key {
            self.remember(key, &response)?;
        }
        Ok(response)
    }

    fn send_with_retry(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let attempts = self.config.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let factor = 1u32 << (attempt - 1).min(16);
                std::thread::sleep(self.config.backoff.saturating_mul(factor).min(self.config.max_backoff));
            }
            self.sends.fetch_add(1, Ordering::SeqCst);
            match self.backend.send(request) {
                Ok(r) => return Ok(r),
                Err(SendError::Transient(m)) => {
                    log::warn!("attempt {} of {attempts} failed: {m}", attempt + 1);
                    last = m;
                }
                Err(SendError::Protocol(m)) => return Err(Error::ProtocolError(m)),
                Err(SendError::Fatal(m)) => {
                    return Err(Error::BackendUnavailable {
                        attempts: attempt + 1,
                        message: m,
                    })
                }
            }
        }
        Err(Error::BackendUnavailable {
            attempts,
            message: last,
        })
    }

    fn remember(&self, key: String, response: &ChatResponse) -> Result<()> {
        let mut file = self.cache_file.lock().expect("cache file lock");
        if let Some(out) = file.as_mut() {
            let line = CacheLine {
                key: key.clone(),
                response: response.clone(),
            };
            let path = self.config.cache_path.clone().unwrap_or_default();
            serde_json::to_writer(&mut *out, &line)?;
            out.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
            out.flush().map_err(|e| Error::io(&path, e))?;
        }
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, response.clone());
        Ok(())
    }

    /// Completes requests with at most `concurrency` in flight. Results keep
    /// input order.
    pub fn complete_many(&self, requests: &[ChatRequest]) -> Vec<Result<ChatResponse>> {
        self.pool
            .install(|| requests.par_iter().map(|r| self.complete(r)).collect())
    }

    /// Runs `f` over `items` on the client's pool, keeping input order.
    pub fn map_concurrent<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }
}
