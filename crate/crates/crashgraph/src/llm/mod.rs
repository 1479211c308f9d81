//! Chat-completion backend abstraction, prompt construction, and strict
//! parsing of model responses.

pub mod http;
pub mod mock;
pub mod parse;
pub mod prompts;
pub mod scripted;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub use http::{HttpBackend, HttpConfig};
pub use mock::MockBackend;
pub use parse::{parse_brainstorm, parse_prediction, BrainstormReply, PredictionReply, Verdict};
pub use prompts::{
    build_baseline_prompt, build_brainstorm_prompt, build_reason_prompt, BaselineVariant,
    PredictionMode,
};
pub use scripted::ScriptedBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub text: String,
}

/// A chat-completion request. Temperature defaults to 0.0 so repeated runs of
/// a prompt are as stable as the backend allows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_name: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(model_name: impl Into<String>) -> ChatRequest {
        ChatRequest {
            model_name: model_name.into(),
            messages: Vec::new(),
            temperature: 0.0,
        }
    }

    pub fn system(mut self, text: impl Into<String>) -> ChatRequest {
        self.messages.push(ChatMessage { role: Role::System, text: text.into() });
        self
    }

    pub fn user(mut self, text: impl Into<String>) -> ChatRequest {
        self.messages.push(ChatMessage { role: Role::User, text: text.into() });
        self
    }

    /// Concatenated user-visible prompt text, used for digests and logs.
    pub fn joined_text(&self) -> String {
        let mut out = String::new();
        for message in &self.messages {
            out.push_str(&message.text);
            out.push('\n');
        }
        out
    }
}

/// Stable digest of the request's message texts. Deliberately ignores the
/// model name, roles, and temperature: scripted fixtures survive cosmetic
/// code changes but break whenever a prompt template changes.
pub fn request_digest(request: &ChatRequest) -> String {
    let mut hasher = Sha256::new();
    for message in &request.messages {
        hasher.update(message.text.as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

/// A chat-completion transport. Implementations must be callable from
/// concurrent workers.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String>;

    /// Short label for logs and summaries.
    fn describe(&self) -> String;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_depends_only_on_message_texts() {
        let a = ChatRequest::new("model-a").system("s").user("u");
        let mut b = ChatRequest::new("model-b").system("s").user("u");
        b.temperature = 1.3;
        assert_eq!(request_digest(&a), request_digest(&b));

        let c = ChatRequest::new("model-a").system("s").user("u!");
        assert_ne!(request_digest(&a), request_digest(&c));
    }

    #[test]
    fn builders_never_emit_empty_message_lists() {
        let req = ChatRequest::new("m").user("hello");
        assert!(!req.messages.is_empty());
    }
}
