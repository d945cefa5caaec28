//! Participants: remote models, scripted oracles, and transcript replay.

pub mod chat;
pub mod llm;
pub mod oracle;
pub mod prompts;
pub mod replay;
pub mod scripted;

use serde_json::Value;

use crate::response::ParsedResponse;
use crate::stimulus::Stimulus;
use crate::task::TaskScore;
use crate::tasks::{AskSpec, Event, TaskError, TaskSession};

pub use chat::{ChatError, ChatMessage, ChatModel, ChatRequest, EndpointConfig, HttpChatModel, ToolCall, ToolSpec};
pub use llm::LlmParticipant;
pub use oracle::{OracleParticipant, OracleProfile};
pub use prompts::{build_prompt, Condition, FewShot, FewShotDomain, PromptError};
pub use replay::{replay_transcript, ReplayError, ReplayParticipant};
pub use scripted::ScriptedModel;

#[derive(Debug, thiserror::Error)]
pub enum ParticipantError {
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("replay ran out of recorded responses")]
    Exhausted,
    #[error("{0}")]
    Other(String),
}

/// A participant's answer, with the raw text and any model exchanges
/// behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub response: ParsedResponse,
    pub raw: Option<String>,
    pub exchanges: Vec<Value>,
}

impl Reply {
    pub fn plain(response: ParsedResponse) -> Self {
        Reply { response, raw: None, exchanges: Vec::new() }
    }
}

/// Anything that can take a task session.
///
/// `respond` receives the question's answer key; only oracles and replay
/// may look at it.
pub trait Participant: Send {
    /// Recorded in the transcript's start event.
    fn describe(&self) -> Value;

    fn observe(&mut self, stimulus: &Stimulus) -> Result<(), ParticipantError>;

    fn respond(&mut self, question: &Stimulus, ask: &AskSpec) -> Result<Reply, ParticipantError>;

    /// Practice feedback.
    fn feedback(&mut self, _correct: bool) {}
}

/// Drives `session` to completion with `participant`.
pub fn run_session(session: &mut TaskSession, participant: &mut dyn Participant) -> Result<TaskScore, ParticipantError> {
    loop {
        match session.next_event()? {
            Event::Show(s) => participant.observe(&s)?,
            Event::Ask(q) => {
                let ask = session
                    .pending()
                    .and_then(|s| s.ask.clone())
                    .expect("ask event leaves a pending question");
                let reply = participant.respond(&q, &ask)?;
                let ack = session.submit_detailed(reply.response, reply.raw, reply.exchanges)?;
                if let Some(c) = ack.correct {
                    participant.feedback(c);
                }
            }
            Event::Done(score) => return Ok(score),
        }
    }
}
