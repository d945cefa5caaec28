//! Append-only JSONL files, one per session, under `<data_dir>/sessions`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use memsim_core::transcript::{append_events, read_events, TranscriptEvent};
use memsim_core::TaskId;

#[derive(Debug, Clone)]
pub struct TranscriptStore {
    root: PathBuf,
}

impl TranscriptStore {
    pub fn new(data_dir: &Path) -> Self {
        TranscriptStore { root: data_dir.join("sessions") }
    }

    pub fn path(&self, session_id: &str) -> PathBuf {
        self.root.join(format!("{session_id}.jsonl"))
    }

    pub fn append(&self, session_id: &str, events: &[TranscriptEvent]) -> io::Result<()> {
        if events.is_empty() {
            return Ok(());
        }
        append_events(&self.path(session_id), events)
    }

    /// Every stored event, optionally for one task, as JSON lines.
    pub fn export(&self, task: Option<TaskId>) -> io::Result<String> {
        let mut files: Vec<PathBuf> = match fs::read_dir(&self.root) {
            Ok(rd) => rd.filter_map(|e| e.ok().map(|e| e.path())).collect(),
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(String::new()),
            Err(e) => return Err(e),
        };
        files.retain(|p| p.extension().is_some_and(|e| e == "jsonl"));
        files.sort();
        let mut out = String::new();
        for f in files {
            for e in read_events(&f)? {
                if task.is_none_or(|t| t == e.task) {
                    out.push_str(&serde_json::to_string(&e).map_err(io::Error::other)?);
                    out.push('\n');
                }
            }
        }
        Ok(out)
    }
}
