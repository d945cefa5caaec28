//! One live participant session: a single task or a study plan, driven by
//! the server clock.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use memsim_core::metrics::Embedder;
use memsim_core::participants::prompts::human_prompt;
use memsim_core::response::{parse_response, ResponseSpec};
use memsim_core::rng::derive_seed;
use memsim_core::stimulus::{Stimulus, StimulusPack};
use memsim_core::tasks::{Event, Phase, SessionBuilder, TaskError, TaskSession};
use memsim_core::transcript::{Clock, TranscriptEvent};
use memsim_core::{TaskConfig, TaskId, TaskParams, TaskScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    Finished,
    /// The overall deadline passed before every task was done.
    Expired,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskResult {
    pub task: TaskId,
    pub value: f64,
    pub normalized: f64,
}

impl From<TaskScore> for TaskResult {
    fn from(s: TaskScore) -> Self {
        TaskResult { task: s.task, value: s.value, normalized: s.normalized() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NextView {
    Show {
        task: TaskId,
        task_index: usize,
        stimulus: Stimulus,
        remaining_ms: u64,
        #[serde(skip_serializing_if = "Option::is_none")]
        instructions: Option<String>,
    },
    /// Gap between two items of a sequence.
    Blank { task: TaskId, task_index: usize, remaining_ms: u64 },
    Ask {
        task: TaskId,
        task_index: usize,
        question: Stimulus,
        response_spec: ResponseSpec,
        practice: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        instructions: Option<String>,
    },
    Done { expired: bool, scores: Vec<TaskResult> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmitView {
    pub accepted: bool,
    pub late: bool,
    /// Only for practice questions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultView {
    pub session_id: String,
    pub participant_id: String,
    pub status: Status,
    pub tasks: Vec<TaskId>,
    pub scores: Vec<TaskResult>,
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("session finished")]
    Gone,
    #[error("no question is pending")]
    WrongPhase,
    #[error("unreadable response: {0}")]
    BadResponse(String),
    #[error(transparent)]
    Task(#[from] TaskError),
}

struct Showing {
    stimulus: Stimulus,
    until: u64,
    blank_until: u64,
}

pub struct SessionSetup {
    pub session_id: String,
    pub participant_id: String,
    pub tasks: Vec<TaskId>,
    pub deadline_ms: Option<u64>,
    pub seed: u64,
    pub params: TaskParams,
}

pub struct LiveSession {
    setup: SessionSetup,
    packs: Arc<BTreeMap<TaskId, StimulusPack>>,
    clock: Arc<dyn Clock>,
    embedder: Arc<dyn Embedder>,
    created_ms: u64,
    index: usize,
    current: Option<TaskSession>,
    fresh: bool,
    showing: Option<Showing>,
    persisted: usize,
    outbox: Vec<TranscriptEvent>,
    scores: Vec<TaskScore>,
    status: Status,
}

impl LiveSession {
    pub fn new(
        setup: SessionSetup,
        packs: Arc<BTreeMap<TaskId, StimulusPack>>,
        clock: Arc<dyn Clock>,
        embedder: Arc<dyn Embedder>,
    ) -> Result<Self, TaskError> {
        let created_ms = clock.now_ms();
        let mut s = LiveSession {
            setup,
            packs,
            clock,
            embedder,
            created_ms,
            index: 0,
            current: None,
            fresh: false,
            showing: None,
            persisted: 0,
            outbox: Vec::new(),
            scores: Vec::new(),
            status: Status::Active,
        };
        // build the first task now so a bad config fails the create call
        s.start_task()?;
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.setup.session_id
    }

    pub fn participant_id(&self) -> &str {
        &self.setup.participant_id
    }

    pub fn status(&self) -> Status {
        self.status
    }

    fn start_task(&mut self) -> Result<(), TaskError> {
        let task = self.setup.tasks[self.index];
        let mut config = TaskConfig::new(task, derive_seed(self.setup.seed, &format!("task/{task}")));
        config.params = self.setup.params.clone();
        let mut builder = SessionBuilder::new(config)
            .session_id(self.setup.session_id.clone())
            .participant(
                self.setup.participant_id.clone(),
                json!({ "kind": "human", "plan": self.setup.tasks, "task_index": self.index }),
            )
            .clock(self.clock.clone())
            .embedder(self.embedder.clone());
        if let Some(pack) = self.packs.get(&task) {
            builder = builder.pack(pack.clone());
        }
        self.current = Some(builder.build()?);
        self.persisted = 0;
        self.fresh = true;
        Ok(())
    }

    fn drain_current(&mut self) {
        if let Some(s) = &self.current {
            self.outbox.extend_from_slice(&s.events()[self.persisted..]);
            self.persisted = s.events().len();
        }
    }

    /// Events produced since the last call, in order.
    pub fn take_events(&mut self) -> Vec<TranscriptEvent> {
        self.drain_current();
        std::mem::take(&mut self.outbox)
    }

    fn past_deadline(&self) -> bool {
        self.setup
            .deadline_ms
            .is_some_and(|d| self.clock.now_ms().saturating_sub(self.created_ms) > d)
    }

    fn expire(&mut self) {
        if let Some(s) = self.current.as_mut() {
            s.log_timing(json!({ "phase": "deadline_expired" }));
        }
        self.status = Status::Expired;
        self.showing = None;
    }

    fn instructions(&mut self) -> Option<String> {
        std::mem::take(&mut self.fresh).then(|| human_prompt(self.setup.tasks[self.index]))
    }

    fn done_view(&self) -> NextView {
        NextView::Done {
            expired: self.status == Status::Expired,
            scores: self.scores.iter().map(|s| TaskResult::from(*s)).collect(),
        }
    }

    pub fn next(&mut self) -> Result<NextView, SessionError> {
        if self.status != Status::Active {
            return Err(SessionError::Gone);
        }
        if self.past_deadline() {
            self.expire();
            return Ok(self.done_view());
        }
        let now = self.clock.now_ms();
        let task = self.setup.tasks[self.index];
        let task_index = self.index;
        if let Some(view) = self.pending_view() {
            return Ok(view);
        }
        if let Some(sh) = &self.showing {
            if now < sh.until {
                // re-served while still on screen, never after
                return Ok(NextView::Show {
                    task,
                    task_index,
                    stimulus: sh.stimulus.clone(),
                    remaining_ms: sh.until - now,
                    instructions: None,
                });
            }
            if now < sh.blank_until {
                return Ok(NextView::Blank { task, task_index, remaining_ms: sh.blank_until - now });
            }
            self.showing = None;
        }
        loop {
            if self.current.is_none() {
                self.start_task()?;
            }
            let session = self.current.as_mut().expect("task started");
            match session.next_event()? {
                Event::Show(stimulus) => {
                    let p = &self.setup.params;
                    let (shown, gap) = match stimulus.duration_ms {
                        Some(d) => (d, 0),
                        None => (p.item_ms, p.gap_ms),
                    };
                    self.showing = Some(Showing { stimulus: stimulus.clone(), until: now + shown, blank_until: now + shown + gap });
                    return Ok(NextView::Show {
                        task: self.setup.tasks[self.index],
                        task_index: self.index,
                        stimulus,
                        remaining_ms: shown,
                        instructions: self.instructions(),
                    });
                }
                Event::Ask(_) => return Ok(self.pending_view().expect("question pending")),
                Event::Done(score) => {
                    self.scores.push(score);
                    self.drain_current();
                    self.current = None;
                    self.index += 1;
                    if self.index == self.setup.tasks.len() {
                        self.index -= 1;
                        self.status = Status::Finished;
                        return Ok(self.done_view());
                    }
                }
            }
        }
    }

    fn pending_view(&mut self) -> Option<NextView> {
        let step = self.current.as_ref()?.pending()?.clone();
        let ask = step.ask.expect("pending step is a question");
        Some(NextView::Ask {
            task: self.setup.tasks[self.index],
            task_index: self.index,
            question: step.stimulus,
            response_spec: ask.spec,
            practice: ask.practice,
            instructions: self.instructions(),
        })
    }

    pub fn submit(&mut self, raw: &str) -> Result<SubmitView, SessionError> {
        if self.status != Status::Active {
            return Err(SessionError::Gone);
        }
        let late = self.past_deadline();
        let session = self.current.as_mut().ok_or(SessionError::WrongPhase)?;
        if session.phase() != Phase::AwaitingResponse {
            return Err(SessionError::WrongPhase);
        }
        let spec = session.pending().and_then(|s| s.ask.as_ref()).map(|a| a.spec.clone()).ok_or(SessionError::WrongPhase)?;
        let parsed = parse_response(raw, &spec).map_err(|e| SessionError::BadResponse(e.to_string()))?;
        if late {
            session.record_late(parsed, Some(raw.to_string()))?;
            self.expire();
            return Ok(SubmitView { accepted: false, late: true, correct: None });
        }
        let ack = session.submit_detailed(parsed, Some(raw.to_string()), Vec::new())?;
        Ok(SubmitView { accepted: true, late: false, correct: ack.correct })
    }

    pub fn result(&self) -> ResultView {
        ResultView {
            session_id: self.setup.session_id.clone(),
            participant_id: self.setup.participant_id.clone(),
            status: self.status,
            tasks: self.setup.tasks.clone(),
            scores: self.scores.iter().map(|s| TaskResult::from(*s)).collect(),
        }
    }
}
