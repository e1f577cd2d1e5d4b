//! Durable annotation sessions: one append-only event log per session plus
//! a periodic snapshot.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sumleak_core::anno::{AnnoError, CreateSession, Session, SessionEvent};

use crate::io::{append_line_durable, read_text, write_json, IoError};

pub const DEFAULT_SNAPSHOT_EVERY: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session `{0}` already exists")]
    Exists(String),
    #[error("invalid session id `{0}`")]
    BadId(String),
    #[error(transparent)]
    Anno(#[from] AnnoError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("corrupt log {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    events: usize,
    session: Session,
}

struct Slot {
    /// Readers clone the current snapshot; writers replace it.
    current: RwLock<Arc<Session>>,
    /// Serializes writes and counts logged events.
    writer: Mutex<usize>,
}

pub struct AnnoStore {
    dir: PathBuf,
    snapshot_every: usize,
    sessions: RwLock<BTreeMap<String, Arc<Slot>>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl AnnoStore {
    /// Opens `dir`, replaying every session log found there.
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        Self::open_with(dir, DEFAULT_SNAPSHOT_EVERY)
    }

    pub fn open_with(dir: &Path, snapshot_every: usize) -> Result<Self, StoreError> {
        fs::create_dir_all(dir).map_err(|e| IoError::Io { path: dir.into(), source: e })?;
        let mut sessions = BTreeMap::new();
        let entries = fs::read_dir(dir).map_err(|e| IoError::Io { path: dir.into(), source: e })?;
        for e in entries.flatten() {
            let name = e.file_name().to_string_lossy().to_string();
            if let Some(id) = name.strip_suffix(".log.jsonl") {
                let (session, events) = Self::load(dir, id)?;
                sessions.insert(
                    id.to_string(),
                    Arc::new(Slot { current: RwLock::new(Arc::new(session)), writer: Mutex::new(events) }),
                );
            }
        }
        Ok(AnnoStore { dir: dir.to_path_buf(), snapshot_every: snapshot_every.max(1), sessions: RwLock::new(sessions) })
    }

    fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.log.jsonl"))
    }

    fn snapshot_path(dir: &Path, id: &str) -> PathBuf {
        dir.join(format!("{id}.snapshot.json"))
    }

    fn load(dir: &Path, id: &str) -> Result<(Session, usize), StoreError> {
        let path = dir.join(format!("{id}.log.jsonl"));
        let text = read_text(&path)?;
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let mut events = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            match serde_json::from_str::<SessionEvent>(line) {
                Ok(e) => events.push(e),
                // A torn final line was never acknowledged.
                Err(_) if i + 1 == lines.len() => break,
                Err(e) => {
                    return Err(StoreError::Corrupt { path, message: format!("line {}: {e}", i + 1) });
                }
            }
        }
        let snap: Option<Snapshot> = read_text(&Self::snapshot_path(dir, id))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .filter(|s: &Snapshot| s.events <= events.len());
        let session = match snap {
            Some(s) => {
                let mut session = s.session;
                for e in &events[s.events..] {
                    session.apply(e.clone())?;
                }
                session
            }
            None => Session::replay(&events)?,
        };
        Ok((session, events.len()))
    }

    pub fn ids(&self) -> Vec<String> {
        self.sessions.read().unwrap().keys().cloned().collect()
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, StoreError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownSession(id.to_string()))
    }

    /// Current state of a session.
    pub fn get(&self, id: &str) -> Result<Arc<Session>, StoreError> {
        Ok(self.slot(id)?.current.read().unwrap().clone())
    }

    /// Creates a session; `id` defaults to the next free `session-N`.
    pub fn create(&self, id: Option<String>, request: CreateSession) -> Result<Arc<Session>, StoreError> {
        let mut map = self.sessions.write().unwrap();
        let id = match id {
            Some(id) if !valid_id(&id) => return Err(StoreError::BadId(id)),
            Some(id) if map.contains_key(&id) => return Err(StoreError::Exists(id)),
            Some(id) => id,
            None => (1..).map(|n| format!("session-{n}")).find(|k| !map.contains_key(k)).unwrap(),
        };
        let session = Session::create(id.clone(), request.clone())?;
        let event = SessionEvent::Created { id: id.clone(), request };
        append_line_durable(&self.log_path(&id), &serde_json::to_string(&event).expect("serializable"))?;
        let session = Arc::new(session);
        map.insert(id, Arc::new(Slot { current: RwLock::new(session.clone()), writer: Mutex::new(1) }));
        Ok(session)
    }

    /// Validates `event` against the session, logs it durably, then makes it
    /// visible. Returns the new state.
    pub fn append(&self, id: &str, event: SessionEvent) -> Result<Arc<Session>, StoreError> {
        let slot = self.slot(id)?;
        let mut count = slot.writer.lock().unwrap();
        let mut next = (**slot.current.read().unwrap()).clone();
        next.apply(event.clone())?;
        append_line_durable(&self.log_path(id), &serde_json::to_string(&event).expect("serializable"))?;
        *count += 1;
        let next = Arc::new(next);
        *slot.current.write().unwrap() = next.clone();
        if *count % self.snapshot_every == 0 {
            write_json(&Self::snapshot_path(&self.dir, id), &Snapshot { events: *count, session: (*next).clone() })?;
        }
        Ok(next)
    }

    /// Raw event log of a session.
    pub fn events(&self, id: &str) -> Result<Vec<SessionEvent>, StoreError> {
        self.slot(id)?;
        let text = read_text(&self.log_path(id))?;
        Ok(text.lines().filter_map(|l| serde_json::from_str(l).ok()).collect())
    }
}
