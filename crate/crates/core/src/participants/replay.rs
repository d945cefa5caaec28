//! Re-emits the responses recorded in a transcript.

use std::collections::VecDeque;

use serde_json::{json, Value};

use super::{run_session, Participant, ParticipantError, Reply};
use crate::stimulus::{Stimulus, StimulusPack};
use crate::task::TaskId;
use crate::tasks::{AskSpec, SessionBuilder, TaskError, TaskSession};
use crate::transcript::{ResponseRecord, SchemaMismatch, Transcript};

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(#[from] SchemaMismatch),
    #[error("transcript is for {found}, session is {expected}")]
    TaskMismatch { expected: TaskId, found: TaskId },
    #[error("stimulus pack {found:?} does not match the recorded {expected:?}")]
    PackMismatch { expected: Option<String>, found: Option<String> },
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Participant(#[from] ParticipantError),
}

/// Answers each question with the next recorded response. Late responses
/// are skipped, as they were never scored.
pub struct ReplayParticipant {
    source: String,
    queue: VecDeque<ResponseRecord>,
}

impl ReplayParticipant {
    pub fn new(transcript: &Transcript, task: TaskId) -> Result<Self, ReplayError> {
        transcript.validate()?;
        let found = transcript.task().ok_or(SchemaMismatch::Empty)?;
        if found != task {
            return Err(ReplayError::TaskMismatch { expected: task, found });
        }
        Ok(ReplayParticipant {
            source: transcript.session_id().unwrap_or_default().to_string(),
            queue: transcript.responses().collect(),
        })
    }

    pub fn remaining(&self) -> usize {
        self.queue.len()
    }
}

impl Participant for ReplayParticipant {
    fn describe(&self) -> Value {
        json!({ "kind": "replay", "source": self.source })
    }

    fn observe(&mut self, _stimulus: &Stimulus) -> Result<(), ParticipantError> {
        Ok(())
    }

    fn respond(&mut self, _question: &Stimulus, ask: &AskSpec) -> Result<Reply, ParticipantError> {
        let r = self.queue.pop_front().ok_or(ParticipantError::Exhausted)?;
        if r.meta != ask.meta {
            return Err(ParticipantError::Other(format!(
                "recorded response for {:?} does not fit question {:?}",
                r.meta, ask.meta
            )));
        }
        Ok(Reply {
            response: r.response,
            raw: r.raw,
            exchanges: r.exchanges,
        })
    }
}

/// Rebuilds the recorded session from its start event and feeds it the
/// recorded responses. The returned session carries the rescored result.
pub fn replay_transcript(transcript: &Transcript, pack: Option<StimulusPack>) -> Result<TaskSession, ReplayError> {
    transcript.validate()?;
    let start = transcript.start()?;
    let task = start.config.task;
    if let Some(p) = &pack {
        if p.task != task {
            return Err(ReplayError::TaskMismatch { expected: task, found: p.task });
        }
        if start.pack_checksum.is_some() && start.pack_checksum.as_deref() != Some(p.checksum.as_str()) {
            return Err(ReplayError::PackMismatch {
                expected: start.pack_checksum.clone(),
                found: Some(p.checksum.clone()),
            });
        }
    }
    let mut participant = ReplayParticipant::new(transcript, task)?;
    let mut builder = SessionBuilder::new(start.config.clone())
        .session_id(transcript.session_id().unwrap_or_default())
        .participant(transcript.participant_id().unwrap_or_default(), start.participant.clone());
    if let Some(p) = pack {
        builder = builder.pack(p);
    }
    let mut session = builder.build()?;
    run_session(&mut session, &mut participant)?;
    Ok(session)
}
