//! Chat-completion backends: a live HTTP client speaking the de-facto
//! chat-completions wire format, and a deterministic filesystem mock for
//! offline runs and tests.

use std::path::{Path, PathBuf};
use std::time::Duration;

use super::{ChatRequest, ChatResponse, FinishReason, LlmError, MockKey};

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

/// Filesystem-backed mock. Fixtures live at
/// `<dir>/<TemplateName>/<bindings-fingerprint>.txt`, with a
/// `<dir>/<TemplateName>/default.txt` fallback per template.
pub struct MockBackend {
    dir: PathBuf,
}

impl MockBackend {
    pub fn new(dir: impl Into<PathBuf>) -> MockBackend {
        MockBackend { dir: dir.into() }
    }

    pub fn fixture_path(dir: &Path, key: &MockKey) -> PathBuf {
        dir.join(key.template.as_str())
            .join(format!("{}.txt", key.bindings_fingerprint))
    }

    pub fn default_fixture_path(dir: &Path, template: super::TemplateName) -> PathBuf {
        dir.join(template.as_str()).join("default.txt")
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let key = request
            .mock_key
            .as_ref()
            .ok_or_else(|| LlmError::Provider {
                status: None,
                message: "mock backend requires a template-tagged request".into(),
            })?;
        let exact = Self::fixture_path(&self.dir, key);
        let fallback = Self::default_fixture_path(&self.dir, key.template);
        let content = std::fs::read_to_string(&exact)
            .or_else(|_| std::fs::read_to_string(&fallback))
            .map_err(|_| LlmError::Provider {
                status: None,
                message: format!(
                    "no mock fixture for {} (tried {} and {})",
                    key.template,
                    exact.display(),
                    fallback.display()
                ),
            })?;
        Ok(ChatResponse {
            content,
            finish_reason: FinishReason::Stop,
            provider_latency_ms: 0,
        })
    }
}

/// Live HTTP backend. Transient failures (429, 5xx, transport errors) are
/// retried with exponential backoff up to the configured budget.
pub struct HttpBackend {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub attempts: u32,
    pub backoff_ms: u64,
    pub timeout: Duration,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>) -> HttpBackend {
        HttpBackend {
            endpoint: endpoint.into(),
            api_key: None,
            attempts: 3,
            backoff_ms: 500,
            timeout: Duration::from_secs(120),
        }
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let body = serde_json::json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        });
        let mut last = String::new();
        for attempt in 0..self.attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.backoff_ms << (attempt - 1)));
            }
            let started = std::time::Instant::now();
            let mut call = ureq::post(&self.endpoint)
                .timeout(self.timeout)
                .set("Content-Type", "application/json");
            if let Some(key) = &self.api_key {
                call = call.set("Authorization", &format!("Bearer {key}"));
            }
            match call.send_json(body.clone()) {
                Ok(response) => {
                    let latency = started.elapsed().as_millis() as u64;
                    let json: serde_json::Value =
                        response.into_json().map_err(|e| LlmError::Provider {
                            status: None,
                            message: format!("invalid completion JSON: {e}"),
                        })?;
                    return parse_completion(&json, latency);
                }
                Err(ureq::Error::Status(status, response)) => {
                    if status == 429 || status >= 500 {
                        last = format!("HTTP {status}");
                        continue;
                    }
                    let message = response.into_string().unwrap_or_default();
                    return Err(LlmError::Provider {
                        status: Some(status),
                        message: message.chars().take(300).collect(),
                    });
                }
                Err(ureq::Error::Transport(t)) => {
                    let text = t.to_string();
                    if text.contains("timed out") || text.contains("timeout") {
                        last = "timeout".into();
                    } else {
                        last = text;
                    }
                }
            }
        }
        if last == "timeout" {
            return Err(LlmError::Timeout);
        }
        Err(LlmError::BudgetExhausted {
            attempts: self.attempts,
            last,
        })
    }
}

fn parse_completion(json: &serde_json::Value, latency: u64) -> Result<ChatResponse, LlmError> {
    let choice = json
        .pointer("/choices/0")
        .ok_or_else(|| LlmError::Provider {
            status: None,
            message: "completion response has no choices".into(),
        })?;
    let content = choice
        .pointer("/message/content")
        .and_then(|v| v.as_str())
        .unwrap_or_default()
        .to_string();
    let finish_reason = match choice.pointer("/finish_reason").and_then(|v| v.as_str()) {
        Some("length") => FinishReason::Length,
        Some("error") => FinishReason::Error,
        _ => FinishReason::Stop,
    };
    if content.is_empty() && finish_reason == FinishReason::Stop {
        return Err(LlmError::Provider {
            status: None,
            message: "stop finish without content".into(),
        });
    }
    Ok(ChatResponse {
        content,
        finish_reason,
        provider_latency_ms: latency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{bindings_fingerprint, TemplateName};
    use crate::testhttp;

    fn request_with_key(template: TemplateName) -> ChatRequest {
        let binds = crate::llm::bindings([("doc", "text")]);
        ChatRequest::single_user("m", "prompt", 0.0, 64).with_mock_key(MockKey {
            template,
            bindings_fingerprint: bindings_fingerprint(&binds),
        })
    }

    #[test]
    fn mock_prefers_exact_fixture_over_default() {
        let dir = tempfile::tempdir().unwrap();
        let request = request_with_key(TemplateName::CqGeneration);
        let key = request.mock_key.as_ref().unwrap();
        let exact = MockBackend::fixture_path(dir.path(), key);
        std::fs::create_dir_all(exact.parent().unwrap()).unwrap();
        std::fs::write(&exact, "exact answer").unwrap();
        std::fs::write(
            MockBackend::default_fixture_path(dir.path(), TemplateName::CqGeneration),
            "default answer",
        )
        .unwrap();
        let backend = MockBackend::new(dir.path());
        assert_eq!(backend.complete(&request).unwrap().content, "exact answer");
    }

    #[test]
    fn mock_falls_back_to_default_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let template_dir = dir.path().join("CqGeneration");
        std::fs::create_dir_all(&template_dir).unwrap();
        std::fs::write(template_dir.join("default.txt"), "default answer").unwrap();
        let backend = MockBackend::new(dir.path());
        let request = request_with_key(TemplateName::CqGeneration);
        assert_eq!(
            backend.complete(&request).unwrap().content,
            "default answer"
        );
    }

    #[test]
    fn mock_without_fixture_is_provider_error() {
        let dir = tempfile::tempdir().unwrap();
        let backend = MockBackend::new(dir.path());
        let request = request_with_key(TemplateName::KgGeneration);
        assert!(matches!(
            backend.complete(&request).unwrap_err(),
            LlmError::Provider { .. }
        ));
    }

    fn completion_body(content: &str) -> String {
        serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
        })
        .to_string()
    }

    #[test]
    fn http_backend_retries_429_then_succeeds() {
        let server = testhttp::serve(vec![
            (429, "slow down".into()),
            (200, completion_body("hello")),
        ]);
        let backend = HttpBackend {
            backoff_ms: 1,
            ..HttpBackend::new(server.url.clone())
        };
        let response = backend
            .complete(&ChatRequest::single_user("m", "p", 0.0, 16))
            .unwrap();
        assert_eq!(response.content, "hello");
        assert_eq!(server.request_count(), 2);
    }

    #[test]
    fn http_backend_exhausts_budget() {
        let server = testhttp::serve(vec![
            (500, "x".into()),
            (500, "x".into()),
            (500, "x".into()),
        ]);
        let backend = HttpBackend {
            backoff_ms: 1,
            ..HttpBackend::new(server.url.clone())
        };
        let err = backend
            .complete(&ChatRequest::single_user("m", "p", 0.0, 16))
            .unwrap_err();
        assert!(matches!(err, LlmError::BudgetExhausted { attempts: 3, .. }));
    }

    #[test]
    fn http_backend_sends_wire_fields() {
        let server = testhttp::serve(vec![(200, completion_body("ok"))]);
        let backend = HttpBackend {
            backoff_ms: 1,
            api_key: Some("sk-test".into()),
            ..HttpBackend::new(server.url.clone())
        };
        backend
            .complete(&ChatRequest::single_user(
                "the-model",
                "the prompt",
                0.0,
                16,
            ))
            .unwrap();
        let request = &server.requests()[0];
        assert!(request.contains("Authorization: Bearer sk-test"));
        assert!(request.contains("\"model\":\"the-model\""));
        assert!(request.contains("\"max_tokens\":16"));
        assert!(request.contains("\"temperature\":0.0"));
        assert!(request.contains("\"role\":\"user\""));
    }
}
