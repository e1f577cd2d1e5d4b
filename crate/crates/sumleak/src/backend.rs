//! Backend construction: the HTTP chat-completion client, rate-limit and
//! retry governance, and config-driven mock registration.

use std::path::PathBuf;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sumleak_core::detect::RulePack;
use sumleak_core::gateway::{
    call_with_retry, register_mock, BackendError, ChatBackend, ChatRequest, Completion, MockKind, MockParams,
    RetryPolicy, ScriptEntry, TokenBucket, Usage,
};

use crate::io::{read_jsonl, IoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Mock,
}

/// One backend as configured. Credentials are referenced by environment
/// variable name only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub id: String,
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default = "default_rpm")]
    pub requests_per_minute: u32,
    #[serde(default = "default_burst")]
    pub burst: u32,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Mock kind: echo, prefix, scrubber or scripted.
    #[serde(default)]
    pub mock: Option<String>,
    /// Sentence count for the prefix mock.
    #[serde(default)]
    pub n: Option<usize>,
    /// Transcript file for the scripted mock.
    #[serde(default)]
    pub transcript: Option<PathBuf>,
}

fn default_rpm() -> u32 {
    60
}
fn default_burst() -> u32 {
    1
}
fn default_timeout() -> u64 {
    120_000
}
fn default_in_flight() -> usize {
    4
}

impl BackendConfig {
    pub fn mock(id: &str, kind: &str) -> Self {
        BackendConfig {
            id: id.to_string(),
            kind: BackendKind::Mock,
            endpoint: None,
            model: None,
            credential_env: None,
            requests_per_minute: default_rpm(),
            burst: default_burst(),
            retry: RetryPolicy::default(),
            timeout_ms: default_timeout(),
            max_in_flight: default_in_flight(),
            mock: Some(kind.to_string()),
            n: None,
            transcript: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.requests_per_minute == 0 {
            return Err(format!("backend {}: requests_per_minute must be positive", self.id));
        }
        if self.retry.max_attempts == 0 {
            return Err(format!("backend {}: retry.max_attempts must be at least 1", self.id));
        }
        match self.kind {
            BackendKind::Http if self.endpoint.is_none() => Err(format!("backend {}: endpoint missing", self.id)),
            BackendKind::Mock if self.mock.is_none() => Err(format!("backend {}: mock kind missing", self.id)),
            _ => Ok(()),
        }
    }
}

/// Raw OpenAI-style chat-completion client. Does not retry.
pub struct HttpBackend {
    id: String,
    endpoint: String,
    credential_env: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(id: &str, endpoint: &str, credential_env: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend { id: id.to_string(), endpoint: endpoint.to_string(), credential_env, agent }
    }

    fn credential(&self) -> Result<Option<String>, BackendError> {
        match &self.credential_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| BackendError::Credential(format!("environment variable {var} is not set"))),
        }
    }
}

fn parse_completion(req: &ChatRequest, body: &Value) -> Result<Completion, BackendError> {
    let text = body
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::BadResponse("no choices[0].message.content".into()))?;
    let mut c = Completion::counted(req, text.to_string());
    if let Some(u) = body.get("usage") {
        let field = |k: &str| u.get(k).and_then(Value::as_u64).map(|v| v as u32);
        if let (Some(p), Some(o)) = (field("prompt_tokens"), field("completion_tokens")) {
            c.usage = Usage { prompt_tokens: p, completion_tokens: o };
        }
    }
    Ok(c)
}

impl ChatBackend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn chat(&self, req: &ChatRequest) -> Result<Completion, BackendError> {
        req.validate()?;
        let key = self.credential()?;
        let body = json!({
            "model": req.model,
            "messages": req.messages,
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
        });
        let mut call = self.agent.post(&self.endpoint).header("X-Request-Id", &req.request_id);
        if let Some(k) = &key {
            call = call.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = call.send_json(&body).map_err(|e| BackendError::Transport {
            message: e.to_string(),
            attempts: 1,
        })?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| BackendError::Transport {
            message: e.to_string(),
            attempts: 1,
        })?;
        match status {
            200..=299 => {
                let v: Value = serde_json::from_str(&text).map_err(|e| BackendError::BadResponse(e.to_string()))?;
                parse_completion(req, &v)
            }
            401 | 403 => Err(BackendError::Credential(format!("endpoint refused credentials (status {status})"))),
            429 => Err(BackendError::RateLimited(truncate(&text))),
            500..=599 => Err(BackendError::Server { status, message: truncate(&text) }),
            _ => Err(BackendError::InvalidRequest(format!("status {status}: {}", truncate(&text)))),
        }
    }
}

fn truncate(s: &str) -> String {
    s.chars().take(200).collect()
}

struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Permits);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

impl Permits {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

/// Wraps a backend with a process-wide token bucket, an in-flight cap and
/// retries with exponential backoff. Every attempt passes the bucket.
pub struct Governed {
    inner: Arc<dyn ChatBackend>,
    bucket: Mutex<TokenBucket>,
    start: Instant,
    policy: RetryPolicy,
    permits: Permits,
    admissions: Mutex<Vec<u64>>,
}

impl Governed {
    pub fn new(inner: Arc<dyn ChatBackend>, per_minute: u32, burst: u32, policy: RetryPolicy, max_in_flight: usize) -> Self {
        Governed {
            inner,
            bucket: Mutex::new(TokenBucket::new(per_minute, burst, 0)),
            start: Instant::now(),
            policy,
            permits: Permits { free: Mutex::new(max_in_flight.max(1)), cv: Condvar::new() },
            admissions: Mutex::new(Vec::new()),
        }
    }

    /// Milliseconds since creation at which each attempt was sent.
    pub fn admissions(&self) -> Vec<u64> {
        self.admissions.lock().unwrap().clone()
    }

    fn now_ms(&self) -> u64 {
        self.start.elapsed().as_millis() as u64
    }
}

struct Admitted<'a>(&'a Governed);

impl ChatBackend for Admitted<'_> {
    fn id(&self) -> &str {
        self.0.inner.id()
    }

    fn chat(&self, req: &ChatRequest) -> Result<Completion, BackendError> {
        let g = self.0;
        let at = g.bucket.lock().unwrap().reserve(g.now_ms());
        let now = g.now_ms();
        if at > now {
            std::thread::sleep(Duration::from_millis(at - now));
        }
        g.admissions.lock().unwrap().push(g.now_ms());
        g.inner.chat(req)
    }
}

impl ChatBackend for Governed {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn chat(&self, req: &ChatRequest) -> Result<Completion, BackendError> {
        let _permit = self.permits.acquire();
        call_with_retry(&Admitted(self), req, &self.policy, &mut |ms| {
            std::thread::sleep(Duration::from_millis(ms))
        })
    }
}

/// Gives a backend the id it has in the run config.
pub struct Named {
    id: String,
    inner: Arc<dyn ChatBackend>,
}

impl Named {
    pub fn new(id: &str, inner: Arc<dyn ChatBackend>) -> Self {
        Named { id: id.to_string(), inner }
    }
}

impl ChatBackend for Named {
    fn id(&self) -> &str {
        &self.id
    }

    fn chat(&self, req: &ChatRequest) -> Result<Completion, BackendError> {
        self.inner.chat(req)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Io(#[from] IoError),
}

pub fn load_transcript(path: &std::path::Path) -> Result<Vec<ScriptEntry>, IoError> {
    read_jsonl(path)
}

pub fn build_backend(cfg: &BackendConfig, pack: Arc<RulePack>) -> Result<Arc<dyn ChatBackend>, BuildError> {
    cfg.validate().map_err(BuildError::Config)?;
    match cfg.kind {
        BackendKind::Http => {
            let raw = HttpBackend::new(
                &cfg.id,
                cfg.endpoint.as_deref().unwrap_or_default(),
                cfg.credential_env.clone(),
                Duration::from_millis(cfg.timeout_ms),
            );
            Ok(Arc::new(Governed::new(
                Arc::new(raw),
                cfg.requests_per_minute,
                cfg.burst,
                cfg.retry,
                cfg.max_in_flight,
            )))
        }
        BackendKind::Mock => {
            let kind: MockKind = cfg.mock.as_deref().unwrap_or_default().parse()?;
            let script = match (&cfg.transcript, kind) {
                (Some(p), _) => Some(load_transcript(p)?),
                _ => None,
            };
            let params = MockParams { n: cfg.n, pack: Some(pack), script };
            Ok(Arc::new(Named::new(&cfg.id, register_mock(kind, params)?)))
        }
    }
}
