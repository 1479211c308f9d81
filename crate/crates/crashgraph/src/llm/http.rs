//! JSON-over-HTTP chat-completion backend with bounded retries and a
//! max-in-flight cap.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::llm::{ChatBackend, ChatRequest, Role};

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token, if any.
    pub auth_env: Option<String>,
    pub max_in_flight: usize,
    /// Total attempts per request (first try included).
    pub attempts: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            url: String::new(),
            model: "gpt-3.5-turbo".to_string(),
            auth_env: None,
            max_in_flight: 4,
            attempts: 3,
            backoff_ms: 250,
            timeout_secs: 60,
        }
    }
}

pub struct HttpBackend {
    cfg: HttpConfig,
    token: Option<String>,
    client: reqwest::blocking::Client,
    gate: Gate,
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig) -> Result<HttpBackend> {
        let token = match &cfg.auth_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::Config(format!("auth environment variable {var} is not set"))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let gate = Gate::new(cfg.max_in_flight.max(1));
        Ok(HttpBackend { cfg, token, client, gate })
    }

    fn attempt(&self, request: &ChatRequest) -> std::result::Result<String, AttemptError> {
        let messages: Vec<serde_json::Value> = request
            .messages
            .iter()
            .map(|m| {
                json!({
                    "role": match m.role { Role::System => "system", Role::User => "user" },
                    "content": m.text,
                })
            })
            .collect();
        let payload = json!({
            "model": self.cfg.model,
            "messages": messages,
            "temperature": request.temperature,
        });

        let mut builder = self.client.post(&self.cfg.url).json(&payload);
        if let Some(token) = &self.token {
            builder = builder.bearer_auth(token);
        }
        let response = builder.send().map_err(|e| AttemptError::Transient(e.to_string()))?;
        let status = response.status();
        let body = response.text().map_err(|e| AttemptError::Transient(e.to_string()))?;
        if status.is_server_error() {
            return Err(AttemptError::Transient(format!("HTTP {status}: {body}")));
        }
        if !status.is_success() {
            return Err(AttemptError::Fatal(Error::Http {
                status: status.as_u16(),
                body: truncate(&body, 400),
            }));
        }
        let parsed: CompletionResponse = serde_json::from_str(&body).map_err(|e| {
            AttemptError::Fatal(Error::Transport(format!("unexpected response shape: {e}")))
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| AttemptError::Fatal(Error::Transport("empty choices array".into())))
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String> {
        let _slot = self.gate.acquire();
        let mut backoff = Duration::from_millis(self.cfg.backoff_ms);
        let mut last = String::new();
        for attempt in 0..self.cfg.attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
            match self.attempt(request) {
                Ok(text) => return Ok(text),
                Err(AttemptError::Fatal(e)) => return Err(e),
                Err(AttemptError::Transient(msg)) => {
                    log::warn!("chat attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                }
            }
        }
        Err(Error::Transport(format!(
            "{} attempts exhausted, last failure: {last}",
            self.cfg.attempts.max(1)
        )))
    }

    fn describe(&self) -> String {
        format!("http:{} model={}", self.cfg.url, self.cfg.model)
    }
}

enum AttemptError {
    /// Network failures and 5xx responses: worth retrying.
    Transient(String),
    /// 4xx responses and malformed bodies: retrying cannot help.
    Fatal(Error),
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

fn truncate(text: &str, max: usize) -> String {
    if text.len() <= max {
        text.to_string()
    } else {
        let mut end = max;
        while !text.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}…", &text[..end])
    }
}

/// Counting semaphore bounding concurrent HTTP calls.
struct Gate {
    available: Mutex<usize>,
    signal: Condvar,
}

struct Slot<'a>(&'a Gate);

impl Gate {
    fn new(capacity: usize) -> Gate {
        Gate { available: Mutex::new(capacity), signal: Condvar::new() }
    }

    fn acquire(&self) -> Slot<'_> {
        let mut available = self.available.lock().expect("gate poisoned");
        while *available == 0 {
            available = self.signal.wait(available).expect("gate poisoned");
        }
        *available -= 1;
        Slot(self)
    }
}

impl Drop for Slot<'_> {
    fn drop(&mut self) {
        let mut available = self.0.available.lock().expect("gate poisoned");
        *available += 1;
        self.0.signal.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unreachable_host_yields_transport_error_after_retries() {
        let backend = HttpBackend::new(HttpConfig {
            // TEST-NET-1 address: guaranteed unroutable, fails fast or times out.
            url: "http://127.0.0.1:9".to_string(),
            attempts: 2,
            backoff_ms: 1,
            timeout_secs: 2,
            ..HttpConfig::default()
        })
        .unwrap();
        let request = ChatRequest::new("m").user("hello");
        let err = backend.complete(&request).unwrap_err();
        assert!(matches!(err, Error::Transport(_)), "got {err}");
    }

    #[test]
    fn missing_auth_env_is_a_config_error() {
        let result = HttpBackend::new(HttpConfig {
            url: "http://localhost".to_string(),
            auth_env: Some("CRASHGRAPH_TEST_TOKEN_THAT_DOES_NOT_EXIST".to_string()),
            ..HttpConfig::default()
        });
        assert!(matches!(result, Err(Error::Config(_))));
    }

    #[test]
    fn gate_limits_concurrency() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        use std::sync::Arc;

        let gate = Arc::new(Gate::new(2));
        let live = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let gate = gate.clone();
                let live = live.clone();
                let peak = peak.clone();
                std::thread::spawn(move || {
                    let _slot = gate.acquire();
                    let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    live.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
