//! Prompt rendering and chat-completion access with a filesystem response
//! cache. With the mock backend and a fixed fixture set the whole pipeline
//! is deterministic end to end.

mod backend;
mod template;

pub use backend::{ChatBackend, HttpBackend, MockBackend};
pub use template::{bindings, render, PromptTemplate, TemplateName};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("missing slot binding: {0}")]
    MissingSlot(String),
    #[error("unknown slot binding: {0}")]
    UnknownSlot(String),
    #[error("provider error{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Provider {
        status: Option<u16>,
        message: String,
    },
    #[error("request timed out")]
    Timeout,
    #[error("retry budget exhausted after {attempts} attempts: {last}")]
    BudgetExhausted { attempts: u32, last: String },
    #[error("corrupt cache entry: {0}")]
    CacheCorrupt(PathBuf),
    #[error("gateway I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

/// Identifies the fixture a mock backend should answer with. Not part of
/// the wire format.
#[derive(Debug, Clone)]
pub struct MockKey {
    pub template: TemplateName,
    pub bindings_fingerprint: String,
}

#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub mock_key: Option<MockKey>,
}

impl ChatRequest {
    /// The pipeline's prompts are monolithic, so every request is a single
    /// user message.
    pub fn single_user(
        model: impl Into<String>,
        content: impl Into<String>,
        temperature: f64,
        max_output_tokens: u32,
    ) -> ChatRequest {
        assert!(temperature >= 0.0, "temperature must be non-negative");
        assert!(max_output_tokens > 0, "max_output_tokens must be positive");
        ChatRequest {
            model: model.into(),
            messages: vec![Message {
                role: "user".into(),
                content: content.into(),
            }],
            temperature,
            max_output_tokens,
            mock_key: None,
        }
    }

    pub fn with_mock_key(mut self, key: MockKey) -> ChatRequest {
        self.mock_key = Some(key);
        self
    }

    /// Content hash over model, temperature, and the rendered messages.
    pub fn cache_key(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.model.as_bytes());
        hasher.update([0u8]);
        hasher.update(self.temperature.to_bits().to_le_bytes());
        for message in &self.messages {
            hasher.update([0u8]);
            hasher.update(message.role.as_bytes());
            hasher.update((message.content.len() as u64).to_le_bytes());
            hasher.update(message.content.as_bytes());
        }
        hex(&hasher.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub finish_reason: FinishReason,
    pub provider_latency_ms: u64,
}

/// Stable fingerprint of a bindings map, used to key mock fixtures.
pub fn bindings_fingerprint(bindings: &BTreeMap<String, String>) -> String {
    let mut hasher = Sha256::new();
    for (key, value) in bindings {
        hasher.update((key.len() as u64).to_le_bytes());
        hasher.update(key.as_bytes());
        hasher.update((value.len() as u64).to_le_bytes());
        hasher.update(value.as_bytes());
    }
    hex(&hasher.finalize())[..16].to_string()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Default)]
pub struct GatewayCounters {
    pub backend_calls: AtomicU64,
    pub cache_hits: AtomicU64,
    pub cache_corrupt: AtomicU64,
    /// Responses cut off at the output-token limit.
    pub truncated: AtomicU64,
}

impl GatewayCounters {
    pub fn backend_calls(&self) -> u64 {
        self.backend_calls.load(Ordering::Relaxed)
    }
    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::Relaxed)
    }
    pub fn cache_corrupt(&self) -> u64 {
        self.cache_corrupt.load(Ordering::Relaxed)
    }
    pub fn truncated(&self) -> u64 {
        self.truncated.load(Ordering::Relaxed)
    }
}

/// Counting semaphore bounding in-flight backend requests.
struct Limiter {
    permits: Mutex<usize>,
    released: Condvar,
}

impl Limiter {
    fn new(capacity: usize) -> Limiter {
        Limiter {
            permits: Mutex::new(capacity.max(1)),
            released: Condvar::new(),
        }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.released.wait(permits).unwrap();
        }
        *permits -= 1;
        LimiterGuard { limiter: self }
    }
}

struct LimiterGuard<'a> {
    limiter: &'a Limiter,
}

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.limiter.permits.lock().unwrap() += 1;
        self.limiter.released.notify_one();
    }
}

pub struct Gateway {
    backend: Option<Box<dyn ChatBackend>>,
    cache_dir: Option<PathBuf>,
    limiter: Limiter,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub counters: GatewayCounters,
}

impl Gateway {
    pub fn new(
        backend: Option<Box<dyn ChatBackend>>,
        cache_dir: Option<PathBuf>,
        model: impl Into<String>,
        temperature: f64,
        max_output_tokens: u32,
        concurrency: usize,
    ) -> Gateway {
        Gateway {
            backend,
            cache_dir,
            limiter: Limiter::new(concurrency),
            model: model.into(),
            temperature,
            max_output_tokens,
            counters: GatewayCounters::default(),
        }
    }

    /// Mock gateway over a fixture directory, cache disabled. Used by tests.
    pub fn mock(fixture_dir: impl Into<PathBuf>) -> Gateway {
        Gateway::new(
            Some(Box::new(MockBackend::new(fixture_dir.into()))),
            None,
            "mock-model",
            0.0,
            2048,
            4,
        )
    }

    /// Render a template and return the request carrying its mock key.
    pub fn request_for(
        &self,
        name: TemplateName,
        bindings: &BTreeMap<String, String>,
    ) -> Result<ChatRequest, LlmError> {
        let rendered = render(PromptTemplate::get(name), bindings)?;
        Ok(ChatRequest::single_user(
            &self.model,
            rendered,
            self.temperature,
            self.max_output_tokens,
        )
        .with_mock_key(MockKey {
            template: name,
            bindings_fingerprint: bindings_fingerprint(bindings),
        }))
    }

    /// Render + cached completion; the workhorse used by pipeline stages.
    pub fn call(
        &self,
        name: TemplateName,
        bindings: &BTreeMap<String, String>,
    ) -> Result<ChatResponse, LlmError> {
        let request = self.request_for(name, bindings)?;
        self.cached_complete(&request)
    }

    /// Complete without consulting the cache.
    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let backend = self.backend.as_deref().ok_or_else(|| LlmError::Provider {
            status: None,
            message: "no chat backend configured".into(),
        })?;
        let _permit = self.limiter.acquire();
        self.counters.backend_calls.fetch_add(1, Ordering::Relaxed);
        let response = backend.complete(request)?;
        if response.finish_reason == FinishReason::Length {
            self.counters.truncated.fetch_add(1, Ordering::Relaxed);
        }
        Ok(response)
    }

    /// Cache layout: `<cache_dir>/<first-2-hex>/<key>.resp`. Corrupt entries
    /// are dropped, counted, and recomputed.
    pub fn cached_complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let Some(cache_dir) = &self.cache_dir else {
            return self.complete(request);
        };
        let path = cache_entry_path(cache_dir, &request.cache_key());
        match read_cache_entry(&path) {
            Ok(Some(response)) => {
                self.counters.cache_hits.fetch_add(1, Ordering::Relaxed);
                return Ok(response);
            }
            Ok(None) => {}
            Err(LlmError::CacheCorrupt(_)) => {
                self.counters.cache_corrupt.fetch_add(1, Ordering::Relaxed);
                let _ = std::fs::remove_file(&path);
            }
            Err(other) => return Err(other),
        }
        let response = self.complete(request)?;
        write_cache_entry(&path, &response)?;
        Ok(response)
    }
}

fn cache_entry_path(cache_dir: &Path, key: &str) -> PathBuf {
    cache_dir.join(&key[..2]).join(format!("{key}.resp"))
}

fn read_cache_entry(path: &Path) -> Result<Option<ChatResponse>, LlmError> {
    let bytes = match std::fs::read(path) {
        Ok(bytes) => bytes,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(LlmError::Io(e)),
    };
    match serde_json::from_slice(&bytes) {
        Ok(response) => Ok(Some(response)),
        Err(_) => Err(LlmError::CacheCorrupt(path.to_path_buf())),
    }
}

/// Atomic write-then-rename so concurrent readers never observe a torn entry.
fn write_cache_entry(path: &Path, response: &ChatResponse) -> Result<(), LlmError> {
    let parent = path.parent().expect("cache entry has parent");
    std::fs::create_dir_all(parent)?;
    let tmp = parent.join(format!(
        ".{}.tmp-{}",
        path.file_name().unwrap().to_string_lossy(),
        std::process::id()
    ));
    std::fs::write(
        &tmp,
        serde_json::to_vec(response).expect("response serializes"),
    )?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
