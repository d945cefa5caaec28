//! Transcript events: one append-only JSONL stream per session, with the same
//! schema for human, oracle, and model participants.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::TaskConfig;
use crate::response::ParsedResponse;
use crate::task::{TaskId, TaskScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    Shown,
    Asked,
    Responded,
    Scored,
    Timing,
}

/// One line of a transcript. Field order is the serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub session_id: String,
    pub participant_id: String,
    pub task: TaskId,
    pub trial: u32,
    pub event_type: EventType,
    pub payload: Value,
    pub t_ms: u64,
}

/// Time source for `t_ms` stamps.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;

    /// Called after a stimulus has been presented for `ms` milliseconds.
    /// Simulated clocks advance; wall clocks ignore it.
    fn on_presented(&self, _ms: u64) {}
}

/// Deterministic clock that advances only by presentation time.
#[derive(Debug, Default)]
pub struct VirtualClock(AtomicU64);

impl Clock for VirtualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }

    fn on_presented(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

/// Monotonic wall clock.
#[derive(Debug)]
pub struct MonotonicClock(Instant);

impl Default for MonotonicClock {
    fn default() -> Self {
        MonotonicClock(Instant::now())
    }
}

impl Clock for MonotonicClock {
    fn now_ms(&self) -> u64 {
        self.0.elapsed().as_millis() as u64
    }
}

/// Clock moved by hand; used to drive timing in tests.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn set(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst);
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

impl<C: Clock + ?Sized> Clock for Arc<C> {
    fn now_ms(&self) -> u64 {
        (**self).now_ms()
    }

    fn on_presented(&self, ms: u64) {
        (**self).on_presented(ms)
    }
}

/// Payload of the opening `timing` event; carries everything replay needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartInfo {
    pub phase: String,
    pub config: TaskConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pack_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pack_checksum: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_id: Option<String>,
    /// Free-form participant description (oracle profile, model, condition).
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub participant: Value,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchemaMismatch {
    #[error("transcript is empty")]
    Empty,
    #[error("transcript does not open with a start event")]
    MissingStart,
    #[error("event {index}: {reason}")]
    BadEvent { index: usize, reason: String },
}

/// The events of one session for one task.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transcript {
    pub events: Vec<TranscriptEvent>,
}

impl Transcript {
    pub fn new(events: Vec<TranscriptEvent>) -> Self {
        Transcript { events }
    }

    pub fn task(&self) -> Option<TaskId> {
        self.events.first().map(|e| e.task)
    }

    pub fn session_id(&self) -> Option<&str> {
        self.events.first().map(|e| e.session_id.as_str())
    }

    pub fn participant_id(&self) -> Option<&str> {
        self.events.first().map(|e| e.participant_id.as_str())
    }

    pub fn start(&self) -> Result<StartInfo, SchemaMismatch> {
        let first = self.events.first().ok_or(SchemaMismatch::Empty)?;
        if first.event_type != EventType::Timing {
            return Err(SchemaMismatch::MissingStart);
        }
        let info: StartInfo = serde_json::from_value(first.payload.clone())
            .map_err(|_| SchemaMismatch::MissingStart)?;
        if info.phase != "start" || info.config.task != first.task {
            return Err(SchemaMismatch::MissingStart);
        }
        Ok(info)
    }

    /// The value of the single `scored` event, if the session finished.
    pub fn recorded_score(&self) -> Option<TaskScore> {
        self.events
            .iter()
            .find(|e| e.event_type == EventType::Scored)
            .and_then(|e| serde_json::from_value(e.payload.get("score")?.clone()).ok())
    }

    /// Responses in order, skipping late submissions that were never scored.
    pub fn responses(&self) -> impl Iterator<Item = ResponseRecord> + '_ {
        self.events
            .iter()
            .filter(|e| e.event_type == EventType::Responded)
            .filter_map(|e| serde_json::from_value::<ResponseRecord>(e.payload.clone()).ok())
            .filter(|r| !r.late)
    }

    /// Checks ordering and field consistency.
    pub fn validate(&self) -> Result<(), SchemaMismatch> {
        self.start()?;
        let first = &self.events[0];
        let mut last_t = 0;
        let mut scored = 0;
        for (index, e) in self.events.iter().enumerate() {
            let bad = |reason: &str| SchemaMismatch::BadEvent {
                index,
                reason: reason.to_string(),
            };
            if e.session_id != first.session_id || e.task != first.task {
                return Err(bad("session or task changes mid-transcript"));
            }
            if e.t_ms < last_t {
                return Err(bad("t_ms decreases"));
            }
            last_t = e.t_ms;
            match e.event_type {
                EventType::Scored => scored += 1,
                EventType::Responded => {
                    serde_json::from_value::<ResponseRecord>(e.payload.clone())
                        .map_err(|err| bad(&format!("responded payload: {err}")))?;
                }
                _ => {}
            }
        }
        if scored > 1 {
            return Err(SchemaMismatch::BadEvent {
                index: self.events.len() - 1,
                reason: "more than one scored event".into(),
            });
        }
        Ok(())
    }
}

/// Payload of a `responded` event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub response: ParsedResponse,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    pub expected: crate::tasks::Expected,
    pub meta: crate::tasks::TrialMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bleu: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub late: bool,
    /// Verbatim model exchanges that produced this response.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exchanges: Vec<Value>,
}

/// Writes events as JSON lines, one `write_all` per event.
pub fn append_events(path: &Path, events: &[TranscriptEvent]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    for e in events {
        let mut line = serde_json::to_string(e).map_err(io::Error::other)?;
        line.push('\n');
        file.write_all(line.as_bytes())?;
    }
    file.flush()
}

pub fn write_events(path: &Path, events: &[TranscriptEvent]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).map_err(io::Error::other)?);
        out.push('\n');
    }
    fs::write(path, out)
}

/// Reads every event from a JSONL file, skipping blank lines.
pub fn read_events(path: &Path) -> io::Result<Vec<TranscriptEvent>> {
    let reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), n + 1))
        })?;
        events.push(event);
    }
    Ok(events)
}

/// Splits an event stream into per-(session, task) transcripts, keeping
/// the original order inside each.
pub fn group_transcripts(events: impl IntoIterator<Item = TranscriptEvent>) -> Vec<Transcript> {
    let mut groups: BTreeMap<(String, TaskId), Vec<TranscriptEvent>> = BTreeMap::new();
    for e in events {
        groups.entry((e.session_id.clone(), e.task)).or_default().push(e);
    }
    groups.into_values().map(Transcript::new).collect()
}

/// Reads transcripts from a file or recursively from a directory of `.jsonl` files.
pub fn load_transcripts(path: &Path) -> io::Result<Vec<Transcript>> {
    let mut files = Vec::new();
    collect_jsonl(path, &mut files)?;
    files.sort();
    let mut events = Vec::new();
    for f in files {
        events.extend(read_events(&f)?);
    }
    Ok(group_transcripts(events))
}

fn collect_jsonl(path: &Path, out: &mut Vec<std::path::PathBuf>) -> io::Result<()> {
    if path.is_dir() {
        for entry in fs::read_dir(path)? {
            collect_jsonl(&entry?.path(), out)?;
        }
    } else if path.extension().is_some_and(|e| e == "jsonl") {
        out.push(path.to_path_buf());
    }
    Ok(())
}
