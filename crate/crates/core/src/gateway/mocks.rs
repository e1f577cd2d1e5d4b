use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::str::FromStr;
use core::sync::atomic::{AtomicU32, Ordering};
use serde::{Deserialize, Serialize};

use super::{BackendError, ChatBackend, ChatRequest, Completion, StepRole};
use crate::detect::{scrub, RulePack, REDACTED};
use crate::text::sentences;

/// Returns the last user message unchanged.
#[derive(Debug, Clone)]
pub struct EchoMock {
    id: String,
}

impl EchoMock {
    pub fn new() -> Self {
        EchoMock {
            id: "mock-echo".into(),
        }
    }
}

impl Default for EchoMock {
    fn default() -> Self {
        Self::new()
    }
}

impl ChatBackend for EchoMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn chat(&self, req: &ChatRequest) -> Result<Completion, BackendError> {
        req.validate()?;
        let text = req.last_user().unwrap_or("").to_string();
        Ok(Completion::counted(req, text))
    }
}

/// Returns the first `n` sentences of the document slot.
#[derive(Debug, Clone)]
pub struct PrefixMock {
    id: String,
    pub n: usize,
}

impl PrefixMock {
    pub fn new(n: usize) -> Self {
        PrefixMock {
            id: alloc::format!("mock-prefix-{n}"),
            n,
        }
    }
}

/// The leading `n` sentences of `text`, as one slice of the original.
pub fn leading_sentences(text: &str, n: usize) -> &str {
    let sents = sentences(text);
    if n == 0 || sents.is_empty() {
        return "";
    }
    let last = sents[n.min(sents.len()) - 1];
    let end = last.as_ptr() as usize - text.as_ptr() as usize + last.len();
    text[..end].trim()
}

impl ChatBackend for PrefixMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn chat(&self, req: &ChatRequest) -> Result<Completion, BackendError> {
        req.validate()?;
        let text = leading_sentences(req.document_text(), self.n).to_string();
        Ok(Completion::counted(req, text))
    }
}

/// Replaces every rule-detected span of the document slot with `[REDACTED]`.
#[derive(Debug, Clone)]
pub struct ScrubberMock {
    id: String,
    pack: Arc<RulePack>,
}

impl ScrubberMock {
    pub fn new(pack: Arc<RulePack>) -> Self {
        ScrubberMock {
            id: "mock-scrubber".into(),
            pack,
        }
    }
}

impl ChatBackend for ScrubberMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn chat(&self, req: &ChatRequest) -> Result<Completion, BackendError> {
        req.validate()?;
        let text = scrub(req.document_text(), &self.pack, REDACTED);
        Ok(Completion::counted(req, text))
    }
}

/// One recorded exchange: the prompt text and the completion to replay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub request: String,
    pub response: String,
}

/// Replays recorded completions, looked up by the last user message.
#[derive(Debug, Clone)]
pub struct ScriptedMock {
    id: String,
    entries: Vec<ScriptEntry>,
}

impl ScriptedMock {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        ScriptedMock {
            id: "mock-scripted".into(),
            entries,
        }
    }

    pub fn entries(&self) -> &[ScriptEntry] {
        &self.entries
    }
}

impl ChatBackend for ScriptedMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn chat(&self, req: &ChatRequest) -> Result<Completion, BackendError> {
        req.validate()?;
        let prompt = req.last_user().unwrap_or("");
        self.entries
            .iter()
            .find(|e| e.request == prompt)
            .map(|e| Completion::counted(req, e.response.clone()))
            .ok_or(BackendError::ScriptMiss)
    }
}

/// Fails with a transport error for the first `failures` calls, then
/// delegates.
pub struct FlakyMock {
    id: String,
    failures: u32,
    calls: AtomicU32,
    inner: Arc<dyn ChatBackend>,
}

impl FlakyMock {
    pub fn new(failures: u32, inner: Arc<dyn ChatBackend>) -> Self {
        FlakyMock {
            id: alloc::format!("mock-flaky-{failures}"),
            failures,
            calls: AtomicU32::new(0),
            inner,
        }
    }

    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatBackend for FlakyMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn chat(&self, req: &ChatRequest) -> Result<Completion, BackendError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        if n < self.failures {
            return Err(BackendError::Transport {
                message: "connection reset".into(),
                attempts: 1,
            });
        }
        self.inner.chat(req)
    }
}

/// Sends each request to the backend registered for its step role.
pub struct RoleRouter {
    id: String,
    routes: Vec<(StepRole, Arc<dyn ChatBackend>)>,
    fallback: Arc<dyn ChatBackend>,
}

impl RoleRouter {
    pub fn new(fallback: Arc<dyn ChatBackend>) -> Self {
        RoleRouter {
            id: fallback.id().to_string(),
            routes: Vec::new(),
            fallback,
        }
    }

    pub fn route(mut self, role: StepRole, backend: Arc<dyn ChatBackend>) -> Self {
        self.routes.retain(|(r, _)| *r != role);
        self.routes.push((role, backend));
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

impl ChatBackend for RoleRouter {
    fn id(&self) -> &str {
        &self.id
    }

    fn chat(&self, req: &ChatRequest) -> Result<Completion, BackendError> {
        let backend = req
            .context
            .role
            .and_then(|role| self.routes.iter().find(|(r, _)| *r == role))
            .map_or(&self.fallback, |(_, b)| b);
        backend.chat(req)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockKind {
    Echo,
    PrefixNSentences,
    Scrubber,
    Scripted,
}

impl FromStr for MockKind {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, BackendError> {
        Ok(match s {
            "echo" => MockKind::Echo,
            "prefix" | "prefix_n_sentences" => MockKind::PrefixNSentences,
            "scrubber" => MockKind::Scrubber,
            "scripted" => MockKind::Scripted,
            other => return Err(BackendError::UnknownMock(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct MockParams {
    pub n: Option<usize>,
    pub pack: Option<Arc<RulePack>>,
    pub script: Option<Vec<ScriptEntry>>,
}

pub fn register_mock(kind: MockKind, params: MockParams) -> Result<Arc<dyn ChatBackend>, BackendError> {
    let bad = |m: &str| BackendError::BadMockParams(m.to_string());
    let backend: Box<dyn ChatBackend> = match kind {
        MockKind::Echo => Box::new(EchoMock::new()),
        MockKind::PrefixNSentences => {
            let n = params.n.ok_or_else(|| bad("prefix mock needs n"))?;
            if n == 0 {
                return Err(bad("n must be at least 1"));
            }
            Box::new(PrefixMock::new(n))
        }
        MockKind::Scrubber => Box::new(ScrubberMock::new(
            params.pack.unwrap_or_else(|| Arc::new(RulePack::builtin())),
        )),
        MockKind::Scripted => Box::new(ScriptedMock::new(
            params.script.ok_or_else(|| bad("scripted mock needs a transcript"))?,
        )),
    };
    Ok(Arc::from(backend))
}
