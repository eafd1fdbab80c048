//! Browsing sessions: query history plus pinned records.
//!
//! Every mutation is appended to `sessions.log` as one JSON line carrying a
//! sequence number. Every [`SNAPSHOT_EVERY`] events the full state goes to
//! `sessions.snapshot.json` and the log is truncated. On open the snapshot
//! is loaded and log events with a higher sequence number are replayed, so a
//! crash between writing the snapshot and truncating the log is harmless.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use guiscout_core::Query;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LOG_FILE: &str = "sessions.log";
pub const SNAPSHOT_FILE: &str = "sessions.snapshot.json";
const SNAPSHOT_EVERY: u64 = 256;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session storage: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub timestamp_ms: u64,
    pub query: Query,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub created_ms: u64,
    pub query_history: Vec<HistoryEntry>,
    pub pins: Vec<String>,
}

impl Session {
    fn last_timestamp(&self) -> u64 {
        self.query_history.last().map_or(self.created_ms, |e| e.timestamp_ms)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Created { seq: u64, id: String, ts: u64 },
    Query { seq: u64, id: String, ts: u64, query: Query },
    Pin { seq: u64, id: String, record_id: String },
    Unpin { seq: u64, id: String, record_id: String },
}

impl Event {
    fn seq(&self) -> u64 {
        match self {
            Event::Created { seq, .. }
            | Event::Query { seq, .. }
            | Event::Pin { seq, .. }
            | Event::Unpin { seq, .. } => *seq,
        }
    }
}

#[derive(Default, Serialize, Deserialize)]
struct Snapshot {
    seq: u64,
    sessions: Vec<Session>,
}

#[derive(Default)]
struct Inner {
    sessions: HashMap<String, Session>,
    seq: u64,
    since_snapshot: u64,
    log: Option<File>,
}

impl Inner {
    fn apply(&mut self, event: &Event) {
        self.seq = self.seq.max(event.seq());
        match event {
            Event::Created { id, ts, .. } => {
                self.sessions.entry(id.clone()).or_insert_with(|| Session {
                    session_id: id.clone(),
                    created_ms: *ts,
                    query_history: Vec::new(),
                    pins: Vec::new(),
                });
            }
            Event::Query { id, ts, query, .. } => {
                if let Some(s) = self.sessions.get_mut(id) {
                    s.query_history.push(HistoryEntry { timestamp_ms: *ts, query: query.clone() });
                }
            }
            Event::Pin { id, record_id, .. } => {
                if let Some(s) = self.sessions.get_mut(id) {
                    if !s.pins.contains(record_id) {
                        s.pins.push(record_id.clone());
                    }
                }
            }
            Event::Unpin { id, record_id, .. } => {
                if let Some(s) = self.sessions.get_mut(id) {
                    s.pins.retain(|p| p != record_id);
                }
            }
        }
    }
}

/// Thread-safe session registry, optionally backed by files in a directory.
pub struct SessionStore {
    dir: Option<PathBuf>,
    inner: Mutex<Inner>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn io(e: impl std::fmt::Display) -> SessionError {
    SessionError::Io(e.to_string())
}

impl SessionStore {
    /// Sessions that live only as long as the process.
    pub fn in_memory() -> Self {
        SessionStore { dir: None, inner: Mutex::new(Inner::default()) }
    }

    /// Load persisted sessions from `dir` and keep logging there.
    pub fn open(dir: &Path) -> Result<Self, SessionError> {
        let mut inner = Inner::default();
        let snap_path = dir.join(SNAPSHOT_FILE);
        if snap_path.exists() {
            let text = std::fs::read_to_string(&snap_path).map_err(io)?;
            let snap: Snapshot = serde_json::from_str(&text).map_err(io)?;
            inner.seq = snap.seq;
            inner.sessions = snap.sessions.into_iter().map(|s| (s.session_id.clone(), s)).collect();
        }
        let log_path = dir.join(LOG_FILE);
        if log_path.exists() {
            let floor = inner.seq;
            for line in BufReader::new(File::open(&log_path).map_err(io)?).lines() {
                let line = line.map_err(io)?;
                // A torn final line from a crash is ignored.
                let Ok(event) = serde_json::from_str::<Event>(&line) else { continue };
                if event.seq() > floor {
                    inner.apply(&event);
                    inner.since_snapshot += 1;
                }
            }
        }
        inner.log = Some(OpenOptions::new().create(true).append(true).open(&log_path).map_err(io)?);
        Ok(SessionStore { dir: Some(dir.to_path_buf()), inner: Mutex::new(inner) })
    }

    fn commit(&self, inner: &mut Inner, event: Event) -> Result<(), SessionError> {
        if let Some(log) = inner.log.as_mut() {
            let mut line = serde_json::to_string(&event).map_err(io)?;
            line.push('\n');
            log.write_all(line.as_bytes()).map_err(io)?;
        }
        inner.apply(&event);
        inner.since_snapshot += 1;
        if inner.since_snapshot >= SNAPSHOT_EVERY {
            self.snapshot_locked(inner)?;
        }
        Ok(())
    }

    fn snapshot_locked(&self, inner: &mut Inner) -> Result<(), SessionError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let mut sessions: Vec<Session> = inner.sessions.values().cloned().collect();
        sessions.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        let snap = Snapshot { seq: inner.seq, sessions };
        let bytes = serde_json::to_vec(&snap).map_err(io)?;
        crate::corpus::write_atomic(&dir.join(SNAPSHOT_FILE), &bytes).map_err(io)?;
        let log = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(dir.join(LOG_FILE))
            .map_err(io)?;
        drop(log);
        inner.log = Some(OpenOptions::new().append(true).open(dir.join(LOG_FILE)).map_err(io)?);
        inner.since_snapshot = 0;
        Ok(())
    }

    /// Write a snapshot now. Called on shutdown.
    pub fn flush(&self) -> Result<(), SessionError> {
        let mut inner = self.inner.lock().expect("session lock");
        if inner.since_snapshot == 0 {
            return Ok(());
        }
        self.snapshot_locked(&mut inner)
    }

    pub fn create(&self) -> Result<Session, SessionError> {
        let id = uuid::Uuid::new_v4().to_string();
        let mut inner = self.inner.lock().expect("session lock");
        let seq = inner.seq + 1;
        self.commit(&mut inner, Event::Created { seq, id: id.clone(), ts: now_ms() })?;
        Ok(inner.sessions[&id].clone())
    }

    pub fn get(&self, id: &str) -> Result<Session, SessionError> {
        let inner = self.inner.lock().expect("session lock");
        inner.sessions.get(id).cloned().ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    /// Append a query. Timestamps within a session strictly increase even
    /// if the wall clock does not.
    pub fn record_query(&self, id: &str, query: Query) -> Result<Session, SessionError> {
        let mut inner = self.inner.lock().expect("session lock");
        let last = inner
            .sessions
            .get(id)
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))?
            .last_timestamp();
        let ts = now_ms().max(last + 1);
        let seq = inner.seq + 1;
        self.commit(&mut inner, Event::Query { seq, id: id.to_string(), ts, query })?;
        Ok(inner.sessions[id].clone())
    }

    /// Pin a record. Pinning twice leaves one pin. The caller checks that
    /// the record exists.
    pub fn pin(&self, id: &str, record_id: &str) -> Result<Session, SessionError> {
        let mut inner = self.inner.lock().expect("session lock");
        let session = inner.sessions.get(id).ok_or_else(|| SessionError::UnknownSession(id.to_string()))?;
        if session.pins.iter().any(|p| p == record_id) {
            return Ok(session.clone());
        }
        let seq = inner.seq + 1;
        self.commit(&mut inner, Event::Pin { seq, id: id.to_string(), record_id: record_id.to_string() })?;
        Ok(inner.sessions[id].clone())
    }

    pub fn unpin(&self, id: &str, record_id: &str) -> Result<Session, SessionError> {
        let mut inner = self.inner.lock().expect("session lock");
        let session = inner.sessions.get(id).ok_or_else(|| SessionError::UnknownSession(id.to_string()))?;
        if !session.pins.iter().any(|p| p == record_id) {
            return Ok(session.clone());
        }
        let seq = inner.seq + 1;
        self.commit(&mut inner, Event::Unpin { seq, id: id.to_string(), record_id: record_id.to_string() })?;
        Ok(inner.sessions[id].clone())
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("session lock").sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(text: &str) -> Query {
        Query::new(text, 6).unwrap()
    }

    #[test]
    fn pins_are_idempotent_and_history_ordered() {
        let store = SessionStore::in_memory();
        let s = store.create().unwrap();
        for t in ["a", "b", "c"] {
            store.record_query(&s.session_id, q(t)).unwrap();
        }
        store.pin(&s.session_id, "r1").unwrap();
        let s = store.pin(&s.session_id, "r1").unwrap();
        assert_eq!(s.pins, vec!["r1"]);
        let ts: Vec<u64> = s.query_history.iter().map(|e| e.timestamp_ms).collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        assert!(ts[0] > s.created_ms);
        let s = store.unpin(&s.session_id, "r1").unwrap();
        assert!(s.pins.is_empty());
    }

    #[test]
    fn unknown_session_is_reported() {
        let store = SessionStore::in_memory();
        assert!(matches!(store.get("nope"), Err(SessionError::UnknownSession(_))));
        assert!(matches!(store.pin("nope", "r"), Err(SessionError::UnknownSession(_))));
    }

    #[test]
    fn survives_reopen_with_and_without_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        let id = {
            let store = SessionStore::open(dir.path()).unwrap();
            let s = store.create().unwrap();
            store.record_query(&s.session_id, q("login")).unwrap();
            store.pin(&s.session_id, "r9").unwrap();
            s.session_id
        };
        let before = SessionStore::open(dir.path()).unwrap().get(&id).unwrap();
        assert_eq!(before.pins, vec!["r9"]);
        assert_eq!(before.query_history.len(), 1);

        let store = SessionStore::open(dir.path()).unwrap();
        store.flush().unwrap();
        drop(store);
        assert_eq!(std::fs::metadata(dir.path().join(LOG_FILE)).unwrap().len(), 0);
        assert_eq!(SessionStore::open(dir.path()).unwrap().get(&id).unwrap(), before);
    }

    #[test]
    fn stale_log_after_snapshot_is_not_replayed_twice() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let s = store.create().unwrap();
        store.record_query(&s.session_id, q("x")).unwrap();
        let log = std::fs::read(dir.path().join(LOG_FILE)).unwrap();
        store.flush().unwrap();
        drop(store);
        // Simulate a crash after the snapshot but before truncation.
        std::fs::write(dir.path().join(LOG_FILE), log).unwrap();
        let s = SessionStore::open(dir.path()).unwrap().get(&s.session_id).unwrap();
        assert_eq!(s.query_history.len(), 1);
    }

    #[test]
    fn automatic_snapshot_kicks_in() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let s = store.create().unwrap();
        for i in 0..SNAPSHOT_EVERY {
            store.record_query(&s.session_id, q(&format!("q{i}"))).unwrap();
        }
        assert!(dir.path().join(SNAPSHOT_FILE).exists());
        drop(store);
        let s = SessionStore::open(dir.path()).unwrap().get(&s.session_id).unwrap();
        assert_eq!(s.query_history.len(), SNAPSHOT_EVERY as usize);
    }
}
