//! Chat-completion plumbing shared by every backend: request and response
//! types, retry and rate-limit policy, and deterministic mock backends.

mod mocks;
mod rate;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::word_count;

pub use mocks::{
    register_mock, EchoMock, FlakyMock, MockKind, MockParams, PrefixMock, RoleRouter, ScriptEntry,
    ScriptedMock, ScrubberMock,
};
pub use rate::{RetryPolicy, TokenBucket};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

/// What a pipeline step asks the model to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRole {
    Summarize,
    Anonymize,
    AnswerQuestions,
    Pseudonymize,
    Detect,
}

/// In-process side channel for mocks. Never sent over the wire.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RequestContext {
    /// Text bound to the `{Document}` slot of the rendered prompt.
    pub document: Option<String>,
    pub role: Option<StepRole>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    pub model: String,
    pub max_tokens: u32,
    pub temperature: f32,
    pub request_id: String,
    #[serde(skip)]
    pub context: RequestContext,
}

impl ChatRequest {
    pub fn user(model: impl Into<String>, content: impl Into<String>) -> Self {
        ChatRequest {
            messages: vec![Message {
                role: Role::User,
                content: content.into(),
            }],
            model: model.into(),
            max_tokens: 1024,
            temperature: 0.0,
            request_id: String::new(),
            context: RequestContext::default(),
        }
    }

    pub fn with_document(mut self, doc: impl Into<String>) -> Self {
        self.context.document = Some(doc.into());
        self
    }

    pub fn with_role(mut self, role: StepRole) -> Self {
        self.context.role = Some(role);
        self
    }

    pub fn with_request_id(mut self, id: impl Into<String>) -> Self {
        self.request_id = id.into();
        self
    }

    pub fn last_user(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }

    /// The document slot when known, else the last user message.
    pub fn document_text(&self) -> &str {
        self.context
            .document
            .as_deref()
            .or_else(|| self.last_user())
            .unwrap_or("")
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.last_user().is_none() {
            return Err(BackendError::InvalidRequest("no user message".into()));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be at least 1".into()));
        }
        Ok(())
    }

    pub fn prompt_words(&self) -> u32 {
        self.messages.iter().map(|m| word_count(&m.content) as u32).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
    pub attempts: u32,
}

impl Completion {
    /// Completion with word-count usage, as reported by the mocks.
    pub fn counted(req: &ChatRequest, text: String) -> Self {
        Completion {
            usage: Usage {
                prompt_tokens: req.prompt_words(),
                completion_tokens: word_count(&text) as u32,
            },
            text,
            attempts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("server error {status}: {message}")]
    Server { status: u16, message: String },
    #[error("credential error: {0}")]
    Credential(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unexpected response: {0}")]
    BadResponse(String),
    #[error("no scripted response for request")]
    ScriptMiss,
    #[error("unknown mock kind `{0}`")]
    UnknownMock(String),
    #[error("bad mock parameters: {0}")]
    BadMockParams(String),
}

impl BackendError {
    /// Transient failures worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport { .. } | BackendError::RateLimited(_) => true,
            BackendError::Server { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub trait ChatBackend: Send + Sync {
    fn id(&self) -> &str;
    fn chat(&self, req: &ChatRequest) -> Result<Completion, BackendError>;
}

/// Runs `req` with retries. `sleep` is called with each backoff delay in
/// milliseconds. The same request (and request id) is resent every time.
pub fn call_with_retry(
    backend: &dyn ChatBackend,
    req: &ChatRequest,
    policy: &RetryPolicy,
    sleep: &mut dyn FnMut(u64),
) -> Result<Completion, BackendError> {
    req.validate()?;
    let mut attempt = 0;
    loop {
        attempt += 1;
        match backend.chat(req) {
            Ok(mut c) => {
                c.attempts = attempt;
                return Ok(c);
            }
            Err(e) if e.is_retryable() && attempt < policy.max_attempts => {
                sleep(policy.backoff_ms(attempt));
            }
            Err(e) if e.is_retryable() => {
                let message = match e {
                    BackendError::Transport { message, .. } => message,
                    other => alloc::format!("{other}"),
                };
                return Err(BackendError::Transport {
                    message,
                    attempts: attempt,
                });
            }
            Err(e) => return Err(e),
        }
    }
}
